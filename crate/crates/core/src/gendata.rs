//! Type distributions, preprocessing transforms and labelled datasets.
//!
//! Each split draws from its own ChaCha stream of one master seed, so a
//! training set of size 100 is a prefix of the one of size 300.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{AgentType, AssignmentValuation, Bundle, Domain, MultiMindedBid, OthersProfile, Outcome, TypeProfile};
use crate::outcomes::OutcomeRule;
use crate::scalar::Scalar;

/// Attempts at drawing a bundle the agent does not already bid on.
pub const DUPLICATE_RESAMPLE_LIMIT: usize = 100;

/// Multi-minded CA type distribution.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CaDistributionConfig {
    pub n: usize,
    pub r: usize,
    pub b: usize,
    /// Probability of growing a bundle by one more item.
    #[serde(default = "default_decay")]
    pub decay_prob: f64,
    /// Weight of the common item values.
    pub beta: f64,
    /// Complementarity exponent.
    pub zeta: f64,
}

fn default_decay() -> f64 {
    0.75
}

impl CaDistributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.r < 1 || self.b < 1 {
            return Err(Error::Config(format!("need n ≥ 2, r ≥ 1, b ≥ 1 (got {}, {}, {})", self.n, self.r, self.b)));
        }
        if self.r > crate::mechanism::MAX_ITEMS {
            return Err(Error::Config(format!("r = {} exceeds {}", self.r, crate::mechanism::MAX_ITEMS)));
        }
        if !(0.0..=1.0).contains(&self.decay_prob) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("decay_prob and beta must lie in [0, 1]".into()));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::Config(format!("zeta must be > 0, got {}", self.zeta)));
        }
        Ok(())
    }
}

/// Assignment-domain distribution: values i.i.d. uniform on `[0, 1]`.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AssignmentDistributionConfig {
    pub n: usize,
}

/// Distribution over type profiles.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum Distribution {
    /// `n` single-minded bidders on one item, values uniform on `[0, 1]`.
    SingleItem { n: usize },
    Ca(CaDistributionConfig),
    Assignment(AssignmentDistributionConfig),
}

impl Distribution {
    pub fn domain(&self) -> Domain {
        match *self {
            Distribution::SingleItem { .. } => Domain::SingleItem,
            Distribution::Ca(c) => Domain::Ca { items: c.r },
            Distribution::Assignment(a) => Domain::Assignment { agents: a.n },
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Distribution::SingleItem { n } => n,
            Distribution::Ca(c) => c.n,
            Distribution::Assignment(a) => a.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Ca(c) => c.validate(),
            _ if self.n() < 2 => Err(Error::Config("need at least two agents".into())),
            _ => Ok(()),
        }
    }

    /// Draws one profile.
    pub fn sample<S: Scalar>(&self, rng: &mut ChaCha8Rng) -> Result<TypeProfile<S>> {
        match *self {
            Distribution::SingleItem { n } => {
                let values: Vec<S> = (0..n).map(|_| S::lit(rng.gen::<f64>())).collect();
                TypeProfile::single_item(&values)
            }
            Distribution::Ca(cfg) => {
                let c = unit_weights(cfg.r, rng);
                let bids = (0..cfg.n).map(|_| sample_ca_type(&cfg, &c, rng)).collect::<Result<Vec<_>>>()?;
                TypeProfile::ca(cfg.r, bids)
            }
            Distribution::Assignment(a) => {
                let rows = (0..a.n).map(|_| (0..a.n).map(|_| S::lit(rng.gen::<f64>())).collect()).collect();
                TypeProfile::assignment(rows)
            }
        }
    }
}

/// `r` weights uniform on `(0, 1]`.
fn unit_weights(r: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..r).map(|_| 1.0 - rng.gen::<f64>()).collect()
}

/// Decay-process bundle: a uniform first item, then another uniform unused
/// item with probability `decay_prob` until the process stops or items run out.
pub fn sample_bundle(r: usize, decay_prob: f64, rng: &mut ChaCha8Rng) -> Bundle {
    assert!(r >= 1);
    let mut items: Vec<usize> = (1..=r).collect();
    items.shuffle(rng);
    let mut size = 1;
    while size < r && rng.gen::<f64>() < decay_prob {
        size += 1;
    }
    Bundle::from_items(&items[..size])
}

/// `((Σ_{j∈S} βc_j + (1-β)d_j) / r)^ζ`.
pub fn bundle_value(s: Bundle, weights: &[f64], r: usize, zeta: f64) -> f64 {
    let sum: f64 = s.items().map(|j| weights[j - 1]).sum();
    (sum / r as f64).powf(zeta)
}

/// One multi-minded CA type given the instance's common values `c`.
pub fn sample_ca_type<S: Scalar>(cfg: &CaDistributionConfig, c: &[f64], rng: &mut ChaCha8Rng) -> Result<MultiMindedBid<S>> {
    let d = unit_weights(cfg.r, rng);
    let weights: Vec<f64> = c.iter().zip(&d).map(|(&ci, &di)| cfg.beta * ci + (1.0 - cfg.beta) * di).collect();
    let mut bundles: Vec<Bundle> = Vec::with_capacity(cfg.b);
    for _ in 0..cfg.b {
        for _ in 0..DUPLICATE_RESAMPLE_LIMIT {
            let s = sample_bundle(cfg.r, cfg.decay_prob, rng);
            if !bundles.contains(&s) {
                bundles.push(s);
                break;
            }
        }
    }
    let pairs: Vec<(Bundle, f64)> = bundles.iter().map(|&s| (s, bundle_value(s, &weights, cfg.r, cfg.zeta))).collect();
    for &(s, v) in &pairs {
        for &(t, w) in &pairs {
            debug_assert!(!s.is_subset_of(t) || v <= w, "bundle values not monotone");
        }
    }
    MultiMindedBid::new(pairs.into_iter().map(|(s, v)| (s, S::lit(v))).collect())
}

/// Scales `θ_{-1}` so its largest value is 1; all-zero profiles are left as is.
pub fn normalize_instance<S: Scalar>(others: &OthersProfile<S>) -> (OthersProfile<S>, S) {
    let m = instance_multiplier(others);
    if m == S::one() {
        (others.clone(), m)
    } else {
        (others.scaled(m), m)
    }
}

/// `1 / max θ_{-1}`, or 1 when every value is zero.
pub fn instance_multiplier<S: Scalar>(others: &OthersProfile<S>) -> S {
    let max = others.max_value();
    if max > S::zero() {
        S::one() / max
    } else {
        S::one()
    }
}

/// Orders agents by their largest reported value, descending; stable in the
/// original index. Returns the reordered profile and `order[new] = old`.
pub fn sort_agents<S: Scalar>(others: &OthersProfile<S>) -> (OthersProfile<S>, Vec<usize>) {
    let maxes: Vec<S> = others.agents().iter().map(|a| a.max_value()).collect();
    let mut order: Vec<usize> = (0..others.len()).collect();
    order.sort_by(|&a, &b| maxes[b].partial_cmp(&maxes[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    (others.permuted(&order), order)
}

/// Transforms applied to `θ_{-i}` before it reaches the learner or a
/// learned price rule.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Preprocess {
    pub sort: bool,
    pub normalize: bool,
}

impl Preprocess {
    pub const NONE: Preprocess = Preprocess { sort: false, normalize: false };

    /// Sorting and normalization for CAs, sorting only for a single item,
    /// nothing for assignment where item identities matter per agent.
    pub fn default_for(domain: Domain) -> Self {
        match domain {
            Domain::Ca { .. } => Preprocess { sort: true, normalize: true },
            Domain::SingleItem => Preprocess { sort: true, normalize: false },
            Domain::Assignment { .. } => Preprocess::NONE,
        }
    }

    /// Transformed others and the multiplier prices must be divided by.
    pub fn apply<S: Scalar>(&self, others: &OthersProfile<S>) -> (OthersProfile<S>, S) {
        let sorted = if self.sort { sort_agents(others).0 } else { others.clone() };
        if self.normalize {
            normalize_instance(&sorted)
        } else {
            (sorted, S::one())
        }
    }
}

/// Labelled instance `(θ, g_1(θ))`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Example<S> {
    pub id: usize,
    /// Reports as drawn; preprocessing is applied by consumers.
    pub profile: TypeProfile<S>,
    pub label: Outcome,
    /// `1 / max θ_{-1}` when instance normalization is enabled, else 1.
    pub multiplier: S,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Dataset<S> {
    pub domain: Domain,
    pub rule: OutcomeRule,
    pub preprocess: Preprocess,
    pub split: Split,
    pub seed: u64,
    pub examples: Vec<Example<S>>,
}

impl<S: Scalar> Dataset<S> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// First `size` examples.
    pub fn prefix(&self, size: usize) -> Self {
        Dataset {
            examples: self.examples[..size.min(self.examples.len())].to_vec(),
            ..self.clone()
        }
    }

    /// `(own type, transformed θ_{-1}, multiplier)` for example `k`; the own
    /// type is scaled by the same multiplier.
    pub fn training_view(&self, k: usize) -> (AgentType<S>, OthersProfile<S>, S) {
        let ex = &self.examples[k];
        let (others, m) = self.preprocess.apply(&ex.profile.others(0));
        let own = ex.profile.agent(0);
        let own = if m == S::one() { own.clone() } else { own.scaled(m) };
        (own, others, m)
    }

    /// Writes one JSON object per line (schema in the README).
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for ex in &self.examples {
            writeln!(w, "{}", self.example_line(ex))?;
        }
        Ok(())
    }

    fn example_line(&self, ex: &Example<S>) -> String {
        let num = |x: S| format!("{:.16e}", x.as_f64());
        let mut s = String::new();
        let (r, b) = match self.domain {
            Domain::Assignment { agents } => (agents, 0),
            d => (
                d.items(),
                ex.profile.agents().iter().filter_map(|a| a.as_bid()).map(|b| b.len()).max().unwrap_or(0),
            ),
        };
        let _ = write!(
            s,
            "{{\"id\":{},\"domain\":\"{}\",\"rule\":\"{}\",\"split\":\"{}\",\"seed\":{},\"sort\":{},\"normalize\":{},\"n\":{},\"r\":{},\"b\":{},\"agents\":[",
            ex.id,
            self.domain.name(),
            rule_tag(self.rule),
            self.split.name(),
            self.seed,
            self.preprocess.sort,
            self.preprocess.normalize,
            ex.profile.n(),
            r,
            b
        );
        for (i, a) in ex.profile.agents().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('[');
            match a {
                AgentType::Bid(bid) => {
                    for (j, &(bundle, v)) in bid.bids().iter().enumerate() {
                        if j > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "[{},{}]", bundle.bits(), num(v));
                    }
                }
                AgentType::Assignment(row) => {
                    for (j, &v) in row.values().iter().enumerate() {
                        if j > 0 {
                            s.push(',');
                        }
                        s.push_str(&num(v));
                    }
                }
            }
            s.push(']');
        }
        let _ = write!(s, "],\"label\":{},\"multiplier\":{}}}", ex.label.index(), num(ex.multiplier));
        s
    }

    /// Reads a file written by [`Dataset::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut examples = Vec::new();
        let mut header: Option<(Domain, OutcomeRule, Preprocess, Split, u64)> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let domain = match rec.domain.as_str() {
                "single_item" => Domain::SingleItem,
                "ca" => Domain::Ca { items: rec.r },
                "assignment" => Domain::Assignment { agents: rec.n },
                other => return Err(Error::Parse(format!("line {}: unknown domain {other}", lineno + 1))),
            };
            let rule = parse_rule_tag(&rec.rule)?;
            let split = match rec.split.as_str() {
                "train" => Split::Train,
                "val" => Split::Validation,
                "test" => Split::Test,
                other => return Err(Error::Parse(format!("unknown split {other}"))),
            };
            let this = (domain, rule, Preprocess { sort: rec.sort, normalize: rec.normalize }, split, rec.seed);
            match &header {
                None => header = Some(this),
                Some(h) if *h != this => return Err(Error::Parse(format!("line {}: mixed dataset header", lineno + 1))),
                _ => {}
            }
            let agents = rec
                .agents
                .into_iter()
                .map(|a| match domain {
                    Domain::Assignment { .. } => {
                        let row = a
                            .into_iter()
                            .map(|v| v.as_f64().map(S::lit).ok_or_else(|| Error::Parse("expected number".into())))
                            .collect::<Result<Vec<S>>>()?;
                        Ok(AgentType::Assignment(AssignmentValuation(row)))
                    }
                    _ => {
                        let pairs = a
                            .into_iter()
                            .map(|p| {
                                let (bits, v): (u32, f64) =
                                    serde_json::from_value(p).map_err(|e| Error::Parse(format!("bid entry: {e}")))?;
                                Ok((Bundle::from_bits(bits), S::lit(v)))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(AgentType::Bid(MultiMindedBid::new(pairs)?))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let profile = TypeProfile::new(domain, agents)?;
            let label = match domain {
                Domain::Assignment { .. } => Outcome::Item(rec.label as usize),
                _ => Outcome::Bundle(Bundle::from_bits(rec.label as u32)),
            };
            examples.push(Example { id: rec.id, profile, label, multiplier: S::lit(rec.multiplier) });
        }
        let (domain, rule, preprocess, split, seed) = header.ok_or(Error::EmptyDataset)?;
        Ok(Dataset { domain, rule, preprocess, split, seed, examples })
    }
}

#[derive(Deserialize)]
struct Record {
    id: usize,
    domain: String,
    rule: String,
    split: String,
    seed: u64,
    sort: bool,
    normalize: bool,
    n: usize,
    r: usize,
    #[allow(dead_code)]
    b: usize,
    agents: Vec<Vec<serde_json::Value>>,
    label: u64,
    multiplier: f64,
}

fn rule_tag(rule: OutcomeRule) -> &'static str {
    match rule {
        OutcomeRule::SingleItemOptimal => "single_item_optimal",
        OutcomeRule::GreedyCa => "greedy_ca",
        OutcomeRule::OptimalCa => "optimal_ca",
        OutcomeRule::Egalitarian => "egalitarian",
    }
}

fn parse_rule_tag(s: &str) -> Result<OutcomeRule> {
    Ok(match s {
        "single_item_optimal" => OutcomeRule::SingleItemOptimal,
        "greedy_ca" => OutcomeRule::GreedyCa,
        "optimal_ca" => OutcomeRule::OptimalCa,
        "egalitarian" => OutcomeRule::Egalitarian,
        other => return Err(Error::Parse(format!("unknown rule {other}"))),
    })
}

/// RNG for one split of a master seed.
pub fn split_rng(seed: u64, split: Split) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split.stream());
    rng
}

/// Samples and labels one split.
pub fn sample_split<S: Scalar>(
    dist: &Distribution,
    rule: OutcomeRule,
    preprocess: Preprocess,
    size: usize,
    seed: u64,
    split: Split,
) -> Result<Dataset<S>> {
    dist.validate()?;
    if size == 0 {
        return Err(Error::EmptyDataset);
    }
    let domain = dist.domain();
    if !rule.supports(domain) {
        return Err(Error::DomainMismatch(format!("rule {:?} on {}", rule, domain.name())));
    }
    let mut rng = split_rng(seed, split);
    let mut examples = Vec::with_capacity(size);
    for id in 0..size {
        let profile: TypeProfile<S> = dist.sample(&mut rng)?;
        let label = rule.allocate(&profile)?.get(0);
        let multiplier = if preprocess.normalize { instance_multiplier(&profile.others(0)) } else { S::one() };
        examples.push(Example { id, profile, label, multiplier });
    }
    Ok(Dataset { domain, rule, preprocess, split, seed, examples })
}

/// Training, validation and test splits from one master seed.
pub fn build_dataset<S: Scalar>(
    dist: &Distribution,
    rule: OutcomeRule,
    preprocess: Preprocess,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(Dataset<S>, Dataset<S>, Dataset<S>)> {
    Ok((
        sample_split(dist, rule, preprocess, sizes.0, seed, Split::Train)?,
        sample_split(dist, rule, preprocess, sizes.1, seed, Split::Validation)?,
        sample_split(dist, rule, preprocess, sizes.2, seed, Split::Test)?,
    ))
}
