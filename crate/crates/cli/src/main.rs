use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mechlearn::features::{AttributeMapKind, KernelConfig};
use mechlearn::gendata::{build_dataset, Dataset, Split};
use mechlearn::harness::{evaluate, fit_and_select, run_experiment, ExperimentConfig, Preset, Scale};
use mechlearn::payments::{BaselineKind, BaselinePrice, LearnedPriceRule};
use mechlearn::trainer::{Loss, OracleMode, TrainedModel, TrainingConfig, TrainingSet};

#[derive(Parser)]
#[command(name = "mechlearn", version, about = "Learn agent-independent payment rules for outcome rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample train, validation and test splits as JSONL.
    Gen(GenArgs),
    /// Train the grid of a config on generated data and keep the selected model.
    Train(TrainArgs),
    /// Evaluate a trained model or a baseline on a dataset.
    Eval(EvalArgs),
    /// Run a full experiment from a config or a preset.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// Replaces the seed list of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the first map of the config.
    #[arg(long, value_enum)]
    map: Option<MapArg>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL dataset, usually `test.jsonl` from `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    #[arg(long)]
    dealloc: bool,
    /// Writes `metrics.json` here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, ValueEnum)]
enum OracleArg {
    Full,
    ItemMon,
}

#[derive(Copy, Clone, ValueEnum)]
enum MapArg {
    Chi1,
    Chi2,
    Chi3,
}

#[derive(Copy, Clone, ValueEnum)]
enum BaselineArg {
    Vcg,
    TotVcg,
    EgVcg,
}

#[derive(Copy, Clone, ValueEnum)]
enum PresetArg {
    Table1,
    Table2,
    Table4,
    Table5,
}

#[derive(Copy, Clone, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(o) = self.oracle {
            cfg.oracle = match o {
                OracleArg::Full => OracleMode::Full,
                OracleArg::ItemMon => OracleMode::ItemMon,
            };
        }
        cfg.validate()?;
        Ok(())
    }
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
    common.apply(&mut cfg)?;
    Ok(cfg)
}

fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.jsonl", split.name()))
}

fn read_dataset(path: &Path) -> Result<Dataset<f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dataset::read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

/// Training split holds the largest configured size; smaller sizes are its
/// prefixes.
fn gen(args: GenArgs) -> Result<()> {
    let cfg = load_config(&args.config, &args.common)?;
    let seed = cfg.seeds[0];
    let size = *cfg.train_sizes.iter().max().expect("validated");
    let sets = build_dataset::<f64>(&cfg.distribution, cfg.rule, cfg.preprocess(), (size, cfg.val_size, cfg.test_size), seed)?;
    fs::create_dir_all(&args.out)?;
    for data in [sets.0, sets.1, sets.2] {
        let path = split_path(&args.out, data.split);
        data.write_jsonl(BufWriter::new(File::create(&path)?))?;
        println!("wrote {} ({} examples)", path.display(), data.len());
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.config, &args.common)?;
    let map = match args.map {
        Some(MapArg::Chi1) => AttributeMapKind::Chi1,
        Some(MapArg::Chi2) => AttributeMapKind::Chi2,
        Some(MapArg::Chi3) => AttributeMapKind::Chi3,
        None => cfg.maps[0],
    };
    let train = read_dataset(&split_path(&args.data, Split::Train))?;
    let val = read_dataset(&split_path(&args.data, Split::Validation))?;
    if train.domain != cfg.domain() || train.rule != cfg.rule {
        bail!("data in {} was not generated for this config", args.data.display());
    }
    let size = cfg.train_sizes[0].min(train.len());
    let set = TrainingSet::new(&train.prefix(size), map, cfg.oracle)?;
    let loss = cfg.null_losses.first().map_or(Loss::default(), |&l| Loss::with_null_loss(l));
    let template = TrainingConfig {
        loss,
        oracle: cfg.oracle,
        epsilon: cfg.epsilon,
        seed: cfg.seeds[0],
        ..TrainingConfig::new(1.0, KernelConfig::Linear, map)
    };
    let fitted = fit_and_select(&set, &val, cfg.rule, &cfg.grid, &template)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("model.json"), fitted.model().to_json()?)?;
    write_json(&args.out.join("cells.json"), &fitted.cells)?;
    let cell = fitted.selected_cell();
    println!(
        "selected C = {} gamma = {:?}: validation accuracy {:?}, w1 = {:.4}",
        cell.c, cell.gamma, cell.val_accuracy, cell.w1
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let report = match (&args.model, args.baseline) {
        (Some(path), _) => {
            let model = TrainedModel::<f64>::from_json(&fs::read_to_string(path)?)?;
            let rule = LearnedPriceRule::new(&model, args.offset)?;
            evaluate(&rule, &data, data.rule, args.dealloc)?
        }
        (None, Some(b)) => {
            let kind = match b {
                BaselineArg::Vcg if data.domain.is_bundle_domain() => BaselineKind::VcgCa,
                BaselineArg::Vcg => BaselineKind::VcgAssignment,
                BaselineArg::TotVcg => BaselineKind::TotVcg,
                BaselineArg::EgVcg => BaselineKind::EgVcg,
            };
            evaluate(&BaselinePrice::new(kind, data.domain)?, &data, data.rule, args.dealloc)?
        }
        (None, None) => unreachable!("clap requires one of --model and --baseline"),
    };
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("metrics.json"), &report)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let runs = match (&args.config, args.preset) {
        (Some(path), _) => vec![(load_config(path, &args.common)?, args.out.clone())],
        (None, Some(p)) => {
            let preset = match p {
                PresetArg::Table1 => Preset::Table1,
                PresetArg::Table2 => Preset::Table2,
                PresetArg::Table4 => Preset::Table4,
                PresetArg::Table5 => Preset::Table5,
            };
            let scale = match args.scale {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Full => Scale::Full,
            };
            let seeds = args.common.seed.map_or(vec![1, 2, 3], |s| vec![s]);
            let mut runs = Vec::new();
            for mut cfg in preset.configs(scale, &seeds) {
                args.common.apply(&mut cfg)?;
                let dir = args.out.join(&cfg.name);
                runs.push((cfg, dir));
            }
            runs
        }
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    for (cfg, dir) in runs {
        let out = run_experiment(&cfg, &dir).with_context(|| format!("experiment {} (partial output in {})", cfg.name, dir.display()))?;
        println!("{}: {} rows in {:.1}s -> {}", cfg.name, out.rows.len(), out.manifest.total_secs, dir.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
    }
}
