//! Metrics, hyperparameter selection and experiment pipelines.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AttributeMapKind, KernelConfig};
use crate::gendata::{sample_split, Dataset, Distribution, Preprocess, Split};
use crate::mechanism::{argmax_utility, ir_violation, regret_from_prices, Domain, OthersProfile, Outcome, PriceFunction};
use crate::outcomes::{candidate_outcomes, OutcomeRule};
use crate::payments::{BaselineKind, BaselinePrice, LearnedPriceRule};
use crate::payments::deallocate_fix;
use crate::scalar::{Scalar, Value};
use crate::trainer::{train_on, Loss, OracleMode, TrainedModel, TrainingConfig, TrainingSet};

/// Test-set metrics over all `n·ℓ` agent roles.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percent of roles where the induced classifier matches the rule.
    pub accuracy: f64,
    /// Mean ex post regret.
    pub regret: f64,
    /// Fraction of roles with negative utility.
    pub ir_violation: f64,
    /// Mean `welfare(after) / welfare(before)` of the deallocation fix.
    pub welfare_ratio: Option<f64>,
    pub count: usize,
    pub correct: usize,
    /// False when regret is only an upper bound (rule without consumer
    /// sovereignty).
    pub regret_exact: bool,
}

/// Outcomes an agent may reach by misreporting, and whether that set is
/// exact rather than a superset.
pub fn regret_candidates<V: Value>(domain: Domain, others: &OthersProfile<V>) -> (Vec<Outcome>, bool) {
    (candidate_outcomes(domain, others), domain.is_bundle_domain())
}

struct RoleStats {
    correct: bool,
    regret: f64,
    ir: bool,
}

/// Evaluates `(rule, prices)` on every agent role of every instance.
///
/// The agent-1 price function is reused for agent `i` with `θ_{-i}` in its
/// natural order; learned rules apply their own sorting. With `dealloc`, IR
/// is measured after the deallocation fix; accuracy and regret are not.
pub fn evaluate<S: Scalar, P: PriceFunction<S> + ?Sized>(
    prices: &P,
    dataset: &Dataset<S>,
    rule: OutcomeRule,
    dealloc: bool,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !rule.supports(dataset.domain) {
        return Err(Error::DomainMismatch(format!("rule {} on {}", rule.name(), dataset.domain.name())));
    }
    if dealloc && dataset.domain.null_outcome().is_none() {
        return Err(Error::DomainMismatch("deallocation needs a null outcome".into()));
    }
    let per_instance: Vec<(Vec<RoleStats>, Option<f64>)> = dataset
        .examples
        .par_iter()
        .map(|ex| -> Result<_> {
            let profile = &ex.profile;
            let domain = profile.domain();
            let alloc = rule.allocate(profile)?;
            let mut stats = Vec::with_capacity(profile.n());
            let mut payments = Vec::with_capacity(profile.n());
            for i in 0..profile.n() {
                let others = profile.others(i);
                let (cands, _) = regret_candidates(domain, &others);
                let p = prices.prices(&others, &cands);
                let own = profile.agent(i);
                let g = alloc.get(i);
                let pick = cands[argmax_utility(own, &p, &cands)?];
                let regret = regret_from_prices(own, &p, &cands, g)?;
                let pay = p[cands.iter().position(|&o| o == g).ok_or_else(|| Error::OutcomeNotCandidate(g.to_string()))?];
                payments.push(pay);
                stats.push(RoleStats {
                    correct: pick == g,
                    regret: regret.as_f64(),
                    ir: ir_violation(own, g, pay) > S::tol(),
                });
            }
            let ratio = if dealloc {
                let (after, pay, ratio) = deallocate_fix(profile, &alloc, &payments)?;
                for (i, s) in stats.iter_mut().enumerate() {
                    s.ir = ir_violation(profile.agent(i), after.get(i), pay[i]) > S::tol();
                }
                Some(ratio.as_f64())
            } else {
                None
            };
            Ok((stats, ratio))
        })
        .collect::<Result<_>>()?;

    let (mut count, mut correct, mut regret, mut ir) = (0usize, 0usize, 0.0f64, 0usize);
    let mut ratio_sum = 0.0f64;
    for (stats, ratio) in &per_instance {
        for s in stats {
            count += 1;
            correct += s.correct as usize;
            regret += s.regret;
            ir += s.ir as usize;
        }
        ratio_sum += ratio.unwrap_or(0.0);
    }
    Ok(MetricsReport {
        accuracy: 100.0 * correct as f64 / count as f64,
        regret: regret / count as f64,
        ir_violation: ir as f64 / count as f64,
        welfare_ratio: dealloc.then(|| ratio_sum / per_instance.len() as f64),
        count,
        correct,
        regret_exact: dataset.domain.is_bundle_domain(),
    })
}

/// One trained grid cell as seen by model selection.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Candidate {
    pub c: f64,
    pub gamma: Option<f64>,
    pub w1_positive: bool,
    /// Validation accuracy; ignored when `w1_positive` is false.
    pub accuracy: f64,
}

/// Highest validation accuracy among models with `w1 > 0`; ties go to the
/// lower `C`, then the lower `γ`.
pub fn model_select(candidates: &[Candidate]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (j, c) in candidates.iter().enumerate() {
        if !c.w1_positive {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &candidates[b];
                let key = |x: &Candidate| (x.c, x.gamma.unwrap_or(f64::NEG_INFINITY));
                c.accuracy > cur.accuracy || (c.accuracy == cur.accuracy && key(c) < key(cur))
            }
        };
        if better {
            best = Some(j);
        }
    }
    best.ok_or(Error::AllModelsDiscarded)
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    Polynomial,
    Rbf,
}

/// Hyperparameter grid: every `C` crossed with every `γ` (RBF only).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Grid {
    pub kernel: KernelFamily,
    #[serde(default = "default_degree")]
    pub degree: u32,
    pub c: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
}

fn default_degree() -> u32 {
    2
}

impl Grid {
    pub fn rbf(c: &[f64], gamma: &[f64]) -> Self {
        Grid { kernel: KernelFamily::Rbf, degree: default_degree(), c: c.to_vec(), gamma: gamma.to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() {
            return Err(Error::Config("grid needs at least one C".into()));
        }
        if self.kernel == KernelFamily::Rbf && self.gamma.is_empty() {
            return Err(Error::Config("rbf grid needs at least one gamma".into()));
        }
        self.cells().iter().try_for_each(|(_, k)| k.validate())
    }

    /// `(C, kernel)` pairs, ordered by `C` then `γ` as listed.
    pub fn cells(&self) -> Vec<(f64, KernelConfig)> {
        let kernels: Vec<KernelConfig> = match self.kernel {
            KernelFamily::Linear => vec![KernelConfig::Linear],
            KernelFamily::Polynomial => vec![KernelConfig::Polynomial { degree: self.degree }],
            KernelFamily::Rbf => self.gamma.iter().map(|&gamma| KernelConfig::Rbf { gamma }).collect(),
        };
        self.c.iter().flat_map(|&c| kernels.iter().map(move |&k| (c, k))).collect()
    }
}

/// Summary of one grid cell.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub c: f64,
    pub gamma: Option<f64>,
    pub w1: f64,
    pub val_accuracy: Option<f64>,
    pub passes: usize,
    pub converged: bool,
    pub working_set: usize,
    pub oracle_evaluations: u64,
    pub train_secs: f64,
}

/// Grid search result: every trained cell and the selected one.
#[derive(Clone, Debug)]
pub struct Fitted<S> {
    /// One model per grid cell, in [`Grid::cells`] order.
    pub models: Vec<TrainedModel<S>>,
    pub cells: Vec<CellRecord>,
    pub selected: usize,
    pub validation: MetricsReport,
}

impl<S> Fitted<S> {
    pub fn model(&self) -> &TrainedModel<S> {
        &self.models[self.selected]
    }

    pub fn selected_cell(&self) -> &CellRecord {
        &self.cells[self.selected]
    }
}

/// Trains every grid cell on `set`, scores admissible models on `val` and
/// returns the selected one. `template` supplies everything except `C` and
/// the kernel.
pub fn fit_and_select<S: Scalar>(
    set: &TrainingSet<S>,
    val: &Dataset<S>,
    rule: OutcomeRule,
    grid: &Grid,
    template: &TrainingConfig,
) -> Result<Fitted<S>> {
    grid.validate()?;
    let mut models = Vec::new();
    let mut validations = Vec::new();
    let mut cells = Vec::new();
    let mut candidates = Vec::new();
    for (c, kernel) in grid.cells() {
        let cfg = TrainingConfig { c, kernel, ..*template };
        let start = Instant::now();
        let model = train_on(set, &cfg)?;
        let train_secs = start.elapsed().as_secs_f64();
        let validation = if model.is_admissible() {
            Some(evaluate(&LearnedPriceRule::new(&model, S::zero())?, val, rule, false)?)
        } else {
            None
        };
        candidates.push(Candidate {
            c,
            gamma: kernel.gamma(),
            w1_positive: model.is_admissible(),
            accuracy: validation.as_ref().map_or(0.0, |v| v.accuracy),
        });
        cells.push(CellRecord {
            c,
            gamma: kernel.gamma(),
            w1: model.w1.as_f64(),
            val_accuracy: validation.as_ref().map(|v| v.accuracy),
            passes: model.diagnostics.passes,
            converged: model.diagnostics.converged,
            working_set: model.diagnostics.working_set,
            oracle_evaluations: model.diagnostics.oracle_evaluations,
            train_secs,
        });
        models.push(model);
        validations.push(validation);
    }
    let selected = model_select(&candidates)?;
    let validation = validations.swap_remove(selected).expect("selected model is admissible");
    Ok(Fitted { models, cells, selected, validation })
}

/// Experiment description; mirrors the TOML config file field for field.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub distribution: Distribution,
    pub rule: OutcomeRule,
    pub maps: Vec<AttributeMapKind>,
    pub grid: Grid,
    pub train_sizes: Vec<usize>,
    pub val_size: usize,
    pub test_size: usize,
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
    /// Loss for predicting the null outcome; empty means plain 0/1 loss.
    #[serde(default)]
    pub null_losses: Vec<f64>,
    /// Also report every offset with the deallocation fix.
    #[serde(default)]
    pub dealloc: bool,
    #[serde(default)]
    pub oracle: OracleMode,
    /// Defaults to the domain's standard baselines.
    #[serde(default)]
    pub baselines: Option<Vec<BaselineKind>>,
    /// Defaults to the domain's standard preprocessing.
    #[serde(default)]
    pub preprocess: Option<Preprocess>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seeds: Vec<u64>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_offsets() -> Vec<f64> {
    vec![0.0]
}

fn default_epsilon() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn domain(&self) -> Domain {
        self.distribution.domain()
    }

    pub fn preprocess(&self) -> Preprocess {
        self.preprocess.unwrap_or_else(|| Preprocess::default_for(self.domain()))
    }

    pub fn baselines(&self) -> Vec<BaselineKind> {
        self.baselines.clone().unwrap_or_else(|| BaselineKind::defaults_for(self.domain()))
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        self.grid.validate()?;
        let domain = self.domain();
        if !self.rule.supports(domain) {
            return Err(Error::DomainMismatch(format!("rule {} on {}", self.rule.name(), domain.name())));
        }
        if self.maps.is_empty() || self.train_sizes.is_empty() || self.seeds.is_empty() || self.offsets.is_empty() {
            return Err(Error::Config("maps, train_sizes, offsets and seeds must be non-empty".into()));
        }
        if let Some(m) = self.maps.iter().find(|m| !m.supports(domain)) {
            return Err(Error::DomainMismatch(format!("map {m} on {}", domain.name())));
        }
        if let Some(b) = self.baselines().iter().find(|b| !b.supports(domain)) {
            return Err(Error::DomainMismatch(format!("baseline {} on {}", b.name(), domain.name())));
        }
        if self.train_sizes.contains(&0) || self.val_size == 0 || self.test_size == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.offsets.iter().any(|&o| !(o >= 0.0)) || self.null_losses.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Config("offsets and null losses must be ≥ 0".into()));
        }
        if self.dealloc && domain.null_outcome().is_none() {
            return Err(Error::DomainMismatch("deallocation needs a null outcome".into()));
        }
        if self.oracle == OracleMode::ItemMon && !domain.is_bundle_domain() {
            return Err(Error::DomainMismatch("item-monotonicity oracle needs a bundle domain".into()));
        }
        Ok(())
    }
}

/// One CSV row; column order is fixed.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub domain: String,
    pub rule: String,
    /// Attribute map, or the baseline name for baseline rows.
    pub map: String,
    pub kernel: String,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub n: usize,
    pub r: Option<usize>,
    pub b: Option<usize>,
    pub zeta: Option<f64>,
    pub beta: Option<f64>,
    pub train_size: Option<usize>,
    pub null_loss: Option<f64>,
    pub offset: f64,
    pub dealloc: bool,
    pub accuracy: Option<f64>,
    pub regret: Option<f64>,
    pub ir_violation: Option<f64>,
    pub welfare_ratio: Option<f64>,
    pub w1_positive: Option<bool>,
    pub seed: u64,
}

pub const CSV_COLUMNS: [&str; 21] = [
    "domain", "rule", "map", "kernel", "C", "gamma", "n", "r", "b", "zeta", "beta", "train_size", "null_loss", "offset",
    "dealloc", "accuracy", "regret", "ir_violation", "welfare_ratio", "w1_positive", "seed",
];

impl ResultRow {
    fn base(cfg: &ExperimentConfig, seed: u64) -> Self {
        let (r, b, zeta, beta) = match cfg.distribution {
            Distribution::Ca(c) => (Some(c.r), Some(c.b), Some(c.zeta), Some(c.beta)),
            _ => (None, None, None, None),
        };
        ResultRow {
            domain: cfg.domain().name().into(),
            rule: cfg.rule.name().into(),
            map: String::new(),
            kernel: "none".into(),
            c: None,
            gamma: None,
            n: cfg.distribution.n(),
            r,
            b,
            zeta,
            beta,
            train_size: None,
            null_loss: None,
            offset: 0.0,
            dealloc: false,
            accuracy: None,
            regret: None,
            ir_violation: None,
            welfare_ratio: None,
            w1_positive: None,
            seed,
        }
    }

    fn with_metrics(mut self, m: &MetricsReport) -> Self {
        self.accuracy = Some(m.accuracy);
        self.regret = Some(m.regret);
        self.ir_violation = Some(m.ir_violation);
        self.welfare_ratio = m.welfare_ratio;
        self
    }
}

/// Per-fit record in the run manifest.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub seed: u64,
    pub map: String,
    pub train_size: usize,
    pub null_loss: Option<f64>,
    pub selected: Option<CellRecord>,
    pub cells: Vec<CellRecord>,
    pub error: Option<String>,
    pub test_secs: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub data_secs: f64,
    pub baseline_secs: f64,
    pub total_secs: f64,
}

/// Run manifest written next to the CSV.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub rows: usize,
    pub fits: Vec<FitRecord>,
    pub timings: Vec<SeedTiming>,
    pub total_secs: f64,
    /// `None` when the run finished.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs an experiment, writing `results.csv` and `manifest.json` into `out`.
///
/// Rows are flushed as they are produced so a failing run keeps what it
/// finished; the manifest records the error.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(out.join(RESULTS_FILE)).map_err(csv_err)?;
    writer.write_record(CSV_COLUMNS).map_err(csv_err)?;
    writer.flush()?;
    let mut manifest = Manifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        rows: 0,
        fits: Vec::new(),
        timings: Vec::new(),
        total_secs: 0.0,
        error: None,
    };
    let mut rows = Vec::new();
    let start = Instant::now();
    let result = run_rows(cfg, &mut manifest, &mut |row: ResultRow| {
        writer.serialize(&row).map_err(csv_err)?;
        writer.flush()?;
        rows.push(row);
        Ok(())
    });
    manifest.rows = rows.len();
    manifest.total_secs = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
    }
    let mut f = File::create(out.join(MANIFEST_FILE))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    result.map(|()| ExperimentOutput { rows, manifest })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn run_rows(cfg: &ExperimentConfig, manifest: &mut Manifest, emit: &mut dyn FnMut(ResultRow) -> Result<()>) -> Result<()> {
    let domain = cfg.domain();
    let preprocess = cfg.preprocess();
    let max_train = *cfg.train_sizes.iter().max().expect("validated non-empty");
    let null_losses: Vec<Option<f64>> =
        if cfg.null_losses.is_empty() { vec![None] } else { cfg.null_losses.iter().map(|&l| Some(l)).collect() };
    for &seed in &cfg.seeds {
        let seed_start = Instant::now();
        let train: Dataset<f64> = sample_split(&cfg.distribution, cfg.rule, preprocess, max_train, seed, Split::Train)?;
        let val: Dataset<f64> = sample_split(&cfg.distribution, cfg.rule, preprocess, cfg.val_size, seed, Split::Validation)?;
        let test: Dataset<f64> = sample_split(&cfg.distribution, cfg.rule, preprocess, cfg.test_size, seed, Split::Test)?;
        let data_secs = seed_start.elapsed().as_secs_f64();

        let base_start = Instant::now();
        for kind in cfg.baselines() {
            let m = evaluate(&BaselinePrice::new(kind, domain)?, &test, cfg.rule, false)?;
            emit(ResultRow { map: kind.name().into(), ..ResultRow::base(cfg, seed) }.with_metrics(&m))?;
        }
        let baseline_secs = base_start.elapsed().as_secs_f64();

        for &map in &cfg.maps {
            for &size in &cfg.train_sizes {
                let set = TrainingSet::new(&train.prefix(size), map, cfg.oracle)?;
                for &null_loss in &null_losses {
                    let loss = null_loss.map_or(Loss::default(), Loss::with_null_loss);
                    let template = TrainingConfig {
                        loss,
                        oracle: cfg.oracle,
                        epsilon: cfg.epsilon,
                        seed,
                        ..TrainingConfig::new(1.0, KernelConfig::Linear, map)
                    };
                    let row = ResultRow {
                        map: map.name().into(),
                        train_size: Some(size),
                        null_loss,
                        ..ResultRow::base(cfg, seed)
                    };
                    let mut record = FitRecord {
                        seed,
                        map: map.name().into(),
                        train_size: size,
                        null_loss,
                        selected: None,
                        cells: Vec::new(),
                        error: None,
                        test_secs: 0.0,
                    };
                    let fitted = match fit_and_select(&set, &val, cfg.rule, &cfg.grid, &template) {
                        Ok(f) => f,
                        Err(Error::AllModelsDiscarded) => {
                            record.error = Some(Error::AllModelsDiscarded.to_string());
                            manifest.fits.push(record);
                            emit(ResultRow { w1_positive: Some(false), ..row })?;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let test_start = Instant::now();
                    let model = fitted.model();
                    let row = ResultRow {
                        kernel: model.config.kernel.name(),
                        c: Some(model.config.c),
                        gamma: model.config.kernel.gamma(),
                        w1_positive: Some(true),
                        ..row
                    };
                    let rule0 = LearnedPriceRule::new(model, 0.0)?;
                    let deallocs: &[bool] = if cfg.dealloc { &[false, true] } else { &[false] };
                    for &dealloc in deallocs {
                        for &offset in &cfg.offsets {
                            let m = evaluate(&rule0.with_offset(offset), &test, cfg.rule, dealloc)?;
                            emit(ResultRow { offset, dealloc, ..row.clone() }.with_metrics(&m))?;
                        }
                    }
                    record.test_secs = test_start.elapsed().as_secs_f64();
                    record.selected = Some(fitted.selected_cell().clone());
                    record.cells = fitted.cells.clone();
                    manifest.fits.push(record);
                }
            }
        }
        manifest.timings.push(SeedTiming { seed, data_secs, baseline_secs, total_secs: seed_start.elapsed().as_secs_f64() });
    }
    Ok(())
}

/// Named experiment bundles.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Single-item auctions.
    Table1,
    /// Multi-minded CAs, optimal and greedy rules.
    Table2,
    /// Offsets, null losses and deallocation for the greedy rule.
    Table4,
    /// Assignment with the egalitarian rule.
    Table5,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Small grids and datasets for a single machine.
    Desk,
    /// Dataset sizes and grids of the published tables.
    Full,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table4 => "table4",
            Preset::Table5 => "table5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "table1" => Preset::Table1,
            "table2" => Preset::Table2,
            "table4" => Preset::Table4,
            "table5" => Preset::Table5,
            other => return Err(Error::Parse(format!("unknown preset {other}"))),
        })
    }

    /// Configurations making up the preset, one per distribution and rule.
    pub fn configs(self, scale: Scale, seeds: &[u64]) -> Vec<ExperimentConfig> {
        let full = scale == Scale::Full;
        let (val, test) = if full { (1000, 1000) } else { (300, 500) };
        let ns: Vec<usize> = if full { (2..=6).collect() } else { vec![2, 3] };
        let ca_grid = Grid::rbf(&[1e4, 1e5], &[0.01, 0.1, 1.0]);
        let base = |name: String, distribution: Distribution, rule: OutcomeRule, maps: Vec<AttributeMapKind>, grid: Grid| {
            ExperimentConfig {
                name,
                distribution,
                rule,
                maps,
                grid,
                train_sizes: vec![300],
                val_size: val,
                test_size: test,
                offsets: default_offsets(),
                null_losses: Vec::new(),
                dealloc: false,
                oracle: OracleMode::Full,
                baselines: None,
                preprocess: None,
                epsilon: default_epsilon(),
                seeds: seeds.to_vec(),
            }
        };
        let ca = |n: usize, zeta: f64| {
            Distribution::Ca(crate::gendata::CaDistributionConfig { n, r: 5, b: 3, decay_prob: 0.75, beta: 0.5, zeta })
        };
        let chi12 = vec![AttributeMapKind::Chi1, AttributeMapKind::Chi2];
        match self {
            Preset::Table1 => ns
                .iter()
                .map(|&n| {
                    base(
                        format!("table1-n{n}"),
                        Distribution::SingleItem { n },
                        OutcomeRule::SingleItemOptimal,
                        chi12.clone(),
                        ca_grid.clone(),
                    )
                })
                .collect(),
            Preset::Table2 => {
                let zetas: &[f64] = if full { &[0.5, 1.0, 1.5] } else { &[1.5] };
                let mut out = Vec::new();
                for rule in [OutcomeRule::OptimalCa, OutcomeRule::GreedyCa] {
                    for &zeta in zetas {
                        for &n in &ns {
                            let mut c = base(
                                format!("table2-{}-n{n}-zeta{zeta}", rule.name()),
                                ca(n, zeta),
                                rule,
                                chi12.clone(),
                                ca_grid.clone(),
                            );
                            if full {
                                c.train_sizes = vec![100, 300, 500];
                            }
                            out.push(c);
                        }
                    }
                }
                out
            }
            Preset::Table4 => {
                let zetas: &[f64] = if full { &[0.5, 1.0, 1.5] } else { &[0.5] };
                let n = if full { 5 } else { 3 };
                zetas
                    .iter()
                    .map(|&zeta| {
                        let mut c = base(
                            format!("table4-zeta{zeta}"),
                            ca(n, zeta),
                            OutcomeRule::GreedyCa,
                            vec![AttributeMapKind::Chi2],
                            ca_grid.clone(),
                        );
                        c.offsets = (0..=5).map(|k| k as f64 * 0.05).collect();
                        c.null_losses = vec![0.5, 1.0, 1.5];
                        c.dealloc = true;
                        c
                    })
                    .collect()
            }
            Preset::Table5 => {
                let ns: Vec<usize> = if full { (2..=6).collect() } else { vec![3, 4] };
                ns.iter()
                    .map(|&n| {
                        let mut c = base(
                            format!("table5-n{n}"),
                            Distribution::Assignment(crate::gendata::AssignmentDistributionConfig { n }),
                            OutcomeRule::Egalitarian,
                            vec![AttributeMapKind::Chi3],
                            Grid::rbf(&[10.0, 1000.0, 1e5], &[0.1, 0.5, 1.0]),
                        );
                        c.train_sizes = vec![600];
                        c
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gendata::CaDistributionConfig;
    use crate::mechanism::FnPrice;

    fn cand(c: f64, gamma: f64, acc: f64) -> Candidate {
        Candidate { c, gamma: Some(gamma), w1_positive: true, accuracy: acc }
    }

    #[test]
    fn selection_rules() {
        assert_eq!(model_select(&[cand(1.0, 1.0, 50.0)]).unwrap(), 0);
        assert_eq!(model_select(&[cand(1.0, 1.0, 80.0), cand(1.0, 1.0, 90.0)]).unwrap(), 1);
        assert_eq!(model_select(&[cand(10.0, 0.1, 90.0), cand(1.0, 1.0, 90.0), cand(1.0, 0.5, 90.0)]).unwrap(), 2);
        let mut discarded = cand(1.0, 1.0, 99.0);
        discarded.w1_positive = false;
        assert_eq!(model_select(&[discarded.clone(), cand(5.0, 1.0, 10.0)]).unwrap(), 1);
        assert!(matches!(model_select(&[discarded]), Err(Error::AllModelsDiscarded)));
    }

    #[test]
    fn regret_candidate_sets() {
        let ca = OthersProfile::<f64>::new(Domain::Ca { items: 5 }, vec![]).unwrap();
        let (c, exact) = regret_candidates(Domain::Ca { items: 5 }, &ca);
        assert_eq!((c.len(), exact), (32, true));
        let asg = crate::TypeProfile::assignment(vec![vec![0.1, 0.2, 0.3]; 3]).unwrap().others(0);
        let (c, exact) = regret_candidates(Domain::Assignment { agents: 3 }, &asg);
        assert_eq!((c.len(), exact), (3, false));
        let si = OthersProfile::<f64>::new(Domain::SingleItem, vec![]).unwrap();
        let (c, exact) = regret_candidates(Domain::SingleItem, &si);
        assert_eq!((c.len(), exact), (2, true));
    }

    #[test]
    fn zero_prices_regret_is_foregone_value() {
        let dist = Distribution::SingleItem { n: 3 };
        let data: Dataset<f64> =
            sample_split(&dist, OutcomeRule::SingleItemOptimal, Preprocess::NONE, 50, 4, Split::Test).unwrap();
        let zero = FnPrice(|_: &OthersProfile<f64>, _: Outcome| 0.0);
        let m = evaluate(&zero, &data, OutcomeRule::SingleItemOptimal, false).unwrap();
        // Free item: every loser would rather win, winners are content.
        let mut total = 0.0;
        for ex in &data.examples {
            let vals: Vec<f64> = (0..3).map(|i| ex.profile.value(i, Outcome::Bundle(crate::Bundle::full(1)))).collect();
            let top = vals.iter().copied().fold(f64::MIN, f64::max);
            let winner = vals.iter().position(|&v| v == top).unwrap();
            total += vals.iter().enumerate().filter(|&(i, _)| i != winner).map(|(_, v)| v).sum::<f64>();
        }
        assert!((m.regret - total / 150.0).abs() < 1e-12);
        assert_eq!(m.ir_violation, 0.0);
        assert_eq!(m.count, 150);
        assert!((m.accuracy - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn vcg_on_optimal_ca_is_perfect() {
        let dist = Distribution::Ca(CaDistributionConfig { n: 3, r: 4, b: 3, decay_prob: 0.75, beta: 0.5, zeta: 1.0 });
        let data: Dataset<f64> =
            sample_split(&dist, OutcomeRule::OptimalCa, Preprocess::NONE, 60, 9, Split::Test).unwrap();
        let vcg = BaselinePrice::new(BaselineKind::VcgCa, data.domain).unwrap();
        let m = evaluate(&vcg, &data, OutcomeRule::OptimalCa, false).unwrap();
        assert_eq!(m.accuracy, 100.0);
        assert!(m.regret <= 1e-9);
        assert_eq!(m.ir_violation, 0.0);
        assert!(m.regret_exact);
    }

    #[test]
    fn dealloc_report_has_no_ir_violations() {
        let dist = Distribution::SingleItem { n: 2 };
        let data: Dataset<f64> =
            sample_split(&dist, OutcomeRule::SingleItemOptimal, Preprocess::NONE, 40, 2, Split::Test).unwrap();
        let steep = FnPrice(|_: &OthersProfile<f64>, o: Outcome| if o.is_null() { 0.0 } else { 0.9 });
        let before = evaluate(&steep, &data, OutcomeRule::SingleItemOptimal, false).unwrap();
        let after = evaluate(&steep, &data, OutcomeRule::SingleItemOptimal, true).unwrap();
        assert!(before.ir_violation > 0.0);
        assert_eq!(after.ir_violation, 0.0);
        let r = after.welfare_ratio.unwrap();
        assert!((0.0..=1.0).contains(&r));
        assert_eq!(before.accuracy, after.accuracy);
    }

    #[test]
    fn grid_cells_order() {
        let g = Grid::rbf(&[1e4, 1e5], &[0.01, 0.1, 1.0]);
        let cells = g.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], (1e4, KernelConfig::Rbf { gamma: 0.01 }));
        assert_eq!(cells[5], (1e5, KernelConfig::Rbf { gamma: 1.0 }));
        assert_eq!(Grid { kernel: KernelFamily::Linear, degree: 2, c: vec![1.0, 2.0], gamma: vec![] }.cells().len(), 2);
    }

    #[test]
    fn config_toml_roundtrip_and_presets_validate() {
        for preset in [Preset::Table1, Preset::Table2, Preset::Table4, Preset::Table5] {
            for scale in [Scale::Desk, Scale::Full] {
                for cfg in preset.configs(scale, &[1, 2, 3]) {
                    cfg.validate().unwrap();
                    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
                    assert_eq!(back, cfg);
                }
            }
        }
        let text = r#"
            rule = "greedy_ca"
            maps = ["chi2"]
            train_sizes = [20]
            val_size = 10
            test_size = 10
            seeds = [7]
            [distribution]
            domain = "ca"
            n = 3
            r = 3
            b = 2
            beta = 0.5
            zeta = 1.5
            [grid]
            kernel = "rbf"
            c = [100.0]
            gamma = [0.5]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.offsets, vec![0.0]);
        assert_eq!(cfg.preprocess(), Preprocess { sort: true, normalize: true });
        let bad = text.replace("maps = [\"chi2\"]", "maps = [\"chi3\"]");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }
}
