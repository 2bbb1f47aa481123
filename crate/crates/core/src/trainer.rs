//! n-slack structural SVM with margin rescaling, trained by constraint
//! generation over a warm-started dual.
//!
//! Primal: minimise `½‖w‖² + (C/ℓ) Σ_k ξ_k` subject to
//! `f_w(θ^k, o^k) - f_w(θ^k, o) ≥ 𝓛(o^k, o) - ξ_k` for every example `k` and
//! candidate `o`. Each constraint `c = (k, o)` has difference vector
//! `δψ_c = ψ(θ^k, o^k) - ψ(θ^k, o)`; the dual is
//!
//! ```text
//! max Σ_c α_c 𝓛_c - ½ αᵀGα   s.t.  α ≥ 0,  Σ_{c ∈ k} α_c ≤ C/ℓ
//! ```
//!
//! with `G_{cc'} = ⟨δψ_c, δψ_c'⟩`. The value coordinate of `ψ` is explicit,
//! so `w1 = Σ_c α_c (v_1(o^k) - v_1(o))` and the rest of `w` stays in
//! kernel expansion form.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{fill_pair_table, kernel_eval, table_inner, AttributeMapKind, InstanceFeatures, KernelConfig, PairTableStore};
use crate::gendata::{Dataset, Preprocess};
use crate::mechanism::{AgentType, Domain, OthersProfile, Outcome, TypeProfile};
use crate::outcomes::item_mon_candidates;
use crate::scalar::Scalar;

/// 0/1 loss, optionally with a different loss for predicting the null
/// outcome when the label is not null.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Loss {
    #[serde(default = "one")]
    pub magnitude: f64,
    #[serde(default)]
    pub null_loss: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for Loss {
    fn default() -> Self {
        Loss { magnitude: 1.0, null_loss: None }
    }
}

impl Loss {
    pub fn with_null_loss(null_loss: f64) -> Self {
        Loss { magnitude: 1.0, null_loss: Some(null_loss) }
    }

    /// `𝓛(label, o)`; zero on the diagonal, non-negative elsewhere.
    pub fn eval<S: Scalar>(&self, label: Outcome, o: Outcome) -> S {
        if o == label {
            S::zero()
        } else if o.is_null() {
            S::lit(self.null_loss.unwrap_or(self.magnitude))
        } else {
            S::lit(self.magnitude)
        }
    }
}

/// Candidate set scanned by the separation oracle.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Every partial outcome of the domain.
    #[default]
    Full,
    /// The null bundle plus bundles some agent bids on explicitly.
    ItemMon,
}

impl OracleMode {
    pub fn name(self) -> &'static str {
        match self {
            OracleMode::Full => "full",
            OracleMode::ItemMon => "item-mon",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub c: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cap on passes over the training set.
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default)]
    pub loss: Loss,
    pub kernel: KernelConfig,
    pub map: AttributeMapKind,
    #[serde(default)]
    pub oracle: OracleMode,
    #[serde(default)]
    pub seed: u64,
    /// KKT gap at which the dual subsolver stops, in units of `C/ℓ`.
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_max_passes() -> usize {
    200
}

fn default_solver_tol() -> f64 {
    1e-6
}

impl TrainingConfig {
    pub fn new(c: f64, kernel: KernelConfig, map: AttributeMapKind) -> Self {
        TrainingConfig {
            c,
            epsilon: default_epsilon(),
            max_passes: default_max_passes(),
            loss: Loss::default(),
            kernel,
            map,
            oracle: OracleMode::Full,
            seed: 0,
            solver_tol: default_solver_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Config(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::Config("solver_tol must be > 0".into()));
        }
        if !(self.loss.magnitude > 0.0) || self.loss.null_loss.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::Config("loss magnitude must be > 0 and null_loss ≥ 0".into()));
        }
        self.kernel.validate()
    }
}

/// Result of a dual solve.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution<S> {
    pub alpha: Vec<S>,
    /// `ξ_k = max(0, max_{c ∈ k} 𝓛_c - ⟨w, δψ_c⟩)` per group.
    pub slack: Vec<S>,
    pub objective: S,
    /// Largest remaining KKT gap over groups.
    pub residual: S,
    pub steps: usize,
}

/// Pairwise coordinate ascent on the n-slack dual.
///
/// Each group (training example) carries an implicit slack variable with
/// gradient 0 and no curvature, holding `C/ℓ - Σ_{c ∈ k} α_c`. A step moves
/// mass from the member (or slack) with the smallest gradient among those
/// holding mass to the one with the largest gradient.
pub struct DualSolver<S> {
    bound: S,
    tol: S,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    loss: Vec<S>,
    gram: Vec<Vec<S>>,
    alpha: Vec<S>,
    grad: Vec<S>,
    rng: ChaCha8Rng,
    max_sweeps: usize,
}

impl<S: Scalar> DualSolver<S> {
    pub fn new(num_groups: usize, bound: S, tol: S, seed: u64) -> Self {
        DualSolver {
            bound,
            tol,
            groups: vec![Vec::new(); num_groups],
            group_of: Vec::new(),
            loss: Vec::new(),
            gram: Vec::new(),
            alpha: Vec::new(),
            grad: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_sweeps: 20_000,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Adds a constraint at `α = 0`. `column[c']` is `G_{c,c'}` for every
    /// existing constraint followed by `G_{cc}`.
    pub fn add(&mut self, group: usize, loss: S, column: Vec<S>) -> usize {
        let id = self.alpha.len();
        assert_eq!(column.len(), id + 1);
        for (row, &g) in self.gram.iter_mut().zip(&column) {
            row.push(g);
        }
        let dot: S = column[..id].iter().zip(&self.alpha).map(|(&g, &a)| g * a).sum();
        self.gram.push(column);
        self.groups[group].push(id);
        self.group_of.push(group);
        self.loss.push(loss);
        self.alpha.push(S::zero());
        self.grad.push(loss - dot);
        id
    }

    pub fn alpha(&self) -> &[S] {
        &self.alpha
    }

    pub fn group_of(&self, c: usize) -> usize {
        self.group_of[c]
    }

    pub fn group_mass(&self, k: usize) -> S {
        self.groups[k].iter().map(|&c| self.alpha[c]).sum()
    }

    fn refresh_gradient(&mut self) {
        let alpha = &self.alpha;
        self.grad = self
            .gram
            .iter()
            .zip(&self.loss)
            .map(|(row, &l)| l - row.iter().zip(alpha).map(|(&g, &a)| g * a).sum::<S>())
            .collect();
    }

    /// `Σ α_c 𝓛_c - ½ αᵀGα`, from the current gradient.
    pub fn objective(&self) -> S {
        let half = S::lit(0.5);
        self.alpha
            .iter()
            .zip(&self.loss)
            .zip(&self.grad)
            .map(|((&a, &l), &g)| half * a * (l + g))
            .sum()
    }

    pub fn slack(&self, k: usize) -> S {
        self.groups[k].iter().map(|&c| self.grad[c]).fold(S::zero(), S::max)
    }

    /// KKT gap of one group and the (up, down) pair realising it; `None`
    /// stands for the implicit slack variable.
    fn group_gap(&self, k: usize) -> (S, Option<usize>, Option<usize>) {
        let members = &self.groups[k];
        let mass: S = members.iter().map(|&c| self.alpha[c]).sum();
        let slack_mass = self.bound - mass;
        let mut up: Option<usize> = None;
        let mut up_g = S::zero();
        for &c in members {
            if self.grad[c] > up_g {
                up_g = self.grad[c];
                up = Some(c);
            }
        }
        let mut down: Option<usize> = None;
        let mut down_g = S::infinity();
        if slack_mass > S::zero() && up.is_some() {
            down_g = S::zero();
        }
        for &c in members {
            if Some(c) != up && self.alpha[c] > S::zero() && self.grad[c] < down_g {
                down_g = self.grad[c];
                down = Some(c);
            }
        }
        if up.is_none() && down.is_none() {
            return (S::zero(), None, None);
        }
        if down_g == S::infinity() {
            return (S::zero(), None, None);
        }
        (up_g - down_g, up, down)
    }

    fn step(&mut self, k: usize, up: Option<usize>, down: Option<usize>, gap: S) {
        let mass: S = self.groups[k].iter().map(|&c| self.alpha[c]).sum();
        let available = match down {
            Some(j) => self.alpha[j],
            None => (self.bound - mass).max(S::zero()),
        };
        let eta = match (up, down) {
            (Some(i), Some(j)) => self.gram[i][i] + self.gram[j][j] - S::lit(2.0) * self.gram[i][j],
            (Some(i), None) => self.gram[i][i],
            (None, Some(j)) => self.gram[j][j],
            (None, None) => return,
        };
        let t = if eta > S::lit(1e-12) { (gap / eta).min(available) } else { available };
        if !(t > S::zero()) {
            return;
        }
        if let Some(i) = up {
            self.alpha[i] += t;
            let col = &self.gram[i];
            for (g, &gc) in self.grad.iter_mut().zip(col) {
                *g -= t * gc;
            }
        }
        if let Some(j) = down {
            if t >= self.alpha[j] {
                self.alpha[j] = S::zero();
            } else {
                self.alpha[j] -= t;
            }
            let col = &self.gram[j];
            for (g, &gc) in self.grad.iter_mut().zip(col) {
                *g += t * gc;
            }
        }
    }

    /// Runs sweeps in random group order until every group's KKT gap is at
    /// most the tolerance or the sweep cap is reached.
    pub fn solve(&mut self) -> DualSolution<S> {
        self.refresh_gradient();
        let active: Vec<usize> = (0..self.groups.len()).filter(|&k| !self.groups[k].is_empty()).collect();
        let mut order = active.clone();
        let mut steps = 0usize;
        for sweep in 0..self.max_sweeps {
            order.shuffle(&mut self.rng);
            let mut residual = S::zero();
            for &k in &order {
                for _ in 0..8 {
                    let (gap, up, down) = self.group_gap(k);
                    residual = residual.max(gap);
                    if gap <= self.tol {
                        break;
                    }
                    self.step(k, up, down, gap);
                    steps += 1;
                }
            }
            if residual <= self.tol {
                break;
            }
            // Incremental updates drift; resynchronise now and then.
            if sweep % 50 == 49 {
                self.refresh_gradient();
            }
        }
        self.refresh_gradient();
        let residual = active.iter().map(|&k| self.group_gap(k).0).fold(S::zero(), S::max);
        DualSolution {
            alpha: self.alpha.clone(),
            slack: (0..self.groups.len()).map(|k| self.slack(k)).collect(),
            objective: self.objective(),
            residual,
            steps,
        }
    }
}

/// Solves the dual over a dense Gram matrix in one go.
pub fn solve_dual<S: Scalar>(gram: &[Vec<S>], losses: &[S], groups: &[usize], bound: S, tol: S, seed: u64) -> DualSolution<S> {
    let num_groups = groups.iter().copied().max().map_or(0, |g| g + 1);
    let mut solver = DualSolver::new(num_groups, bound, tol, seed);
    for (c, (&g, &l)) in groups.iter().zip(losses).enumerate() {
        solver.add(g, l, gram[c][..=c].to_vec());
    }
    solver.solve()
}

/// `w1 = Σ_c α_c (v_1(o^k) - v_1(o))`.
pub fn compute_w1<S: Scalar>(alpha: &[S], value_diffs: &[S]) -> S {
    alpha.iter().zip(value_diffs).map(|(&a, &d)| a * d).sum()
}

/// Loss-augmented argmax over `candidates` given discriminant `scores`.
///
/// Returns the index of the most violated candidate (lowest index on ties)
/// and its violation `𝓛(o^k, o) + f(o) - f(o^k)`.
pub fn separation_oracle<S: Scalar>(candidates: &[Outcome], scores: &[S], label: Outcome, loss: &Loss) -> Result<(usize, S)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let label_pos = candidates
        .iter()
        .position(|&o| o == label)
        .ok_or_else(|| Error::OutcomeNotCandidate(label.to_string()))?;
    let base = scores[label_pos];
    let h: Vec<S> = candidates
        .iter()
        .zip(scores)
        .map(|(&o, &f)| loss.eval::<S>(label, o) + f - base)
        .collect();
    let best = h.iter().copied().fold(S::neg_infinity(), S::max);
    let pos = h.iter().position(|&x| x >= best - S::tol()).unwrap_or(0);
    Ok((pos, h[pos]))
}

/// Training examples as seen by the learner, with candidate points and
/// precomputed pair tables. Independent of kernel and `C`, so one set serves
/// a whole hyperparameter grid.
pub struct TrainingSet<S> {
    domain: Domain,
    map: AttributeMapKind,
    oracle: OracleMode,
    preprocess: Preprocess,
    views: Vec<TypeProfile<S>>,
    labels: Vec<Outcome>,
    candidates: Vec<Vec<Outcome>>,
    label_pos: Vec<usize>,
    offsets: Vec<usize>,
    point_example: Vec<usize>,
    point_outcome: Vec<Outcome>,
    values: Vec<S>,
    self_inner: Vec<S>,
    store: PairTableStore<S>,
}

impl<S: Scalar> TrainingSet<S> {
    pub fn new(dataset: &Dataset<S>, map: AttributeMapKind, oracle: OracleMode) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let domain = dataset.domain;
        if !map.supports(domain) {
            return Err(Error::DomainMismatch(format!("map {} on domain {}", map, domain.name())));
        }
        if oracle == OracleMode::ItemMon && !domain.is_bundle_domain() {
            return Err(Error::DomainMismatch("item-monotonicity oracle needs a bundle domain".into()));
        }
        let full = domain.candidates();
        let mut views = Vec::with_capacity(dataset.len());
        let mut labels = Vec::with_capacity(dataset.len());
        let mut candidates = Vec::with_capacity(dataset.len());
        let mut label_pos = Vec::with_capacity(dataset.len());
        let mut offsets = Vec::with_capacity(dataset.len() + 1);
        let mut point_example = Vec::new();
        let mut point_outcome = Vec::new();
        let mut values = Vec::new();
        let mut feats = Vec::with_capacity(dataset.len());
        for k in 0..dataset.len() {
            let ex = &dataset.examples[k];
            if ex.profile.domain() != domain {
                return Err(Error::DomainMismatch("heterogeneous dataset".into()));
            }
            let (own, others, _) = dataset.training_view(k);
            let mut cands = match oracle {
                OracleMode::Full => full.clone(),
                OracleMode::ItemMon => item_mon_candidates(&ex.profile),
            };
            if !cands.contains(&ex.label) {
                cands.push(ex.label);
                cands.sort();
            }
            offsets.push(point_example.len());
            for &o in &cands {
                point_example.push(k);
                point_outcome.push(o);
                values.push(own.value(o));
            }
            label_pos.push(cands.iter().position(|&o| o == ex.label).expect("label inserted"));
            feats.push(InstanceFeatures::new(&others));
            views.push(TypeProfile::from_parts(own, others)?);
            labels.push(ex.label);
            candidates.push(cands);
        }
        offsets.push(point_example.len());
        let store = PairTableStore::new(map, &feats);
        let self_inner = point_example
            .iter()
            .zip(&point_outcome)
            .map(|(&k, &o)| store.inner(k, o, k, o))
            .collect();
        Ok(TrainingSet {
            domain,
            map,
            oracle,
            preprocess: dataset.preprocess,
            views,
            labels,
            candidates,
            label_pos,
            offsets,
            point_example,
            point_outcome,
            values,
            self_inner,
            store,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_points(&self) -> usize {
        self.values.len()
    }

    pub fn map(&self) -> AttributeMapKind {
        self.map
    }

    pub fn oracle(&self) -> OracleMode {
        self.oracle
    }

    pub fn candidates(&self, k: usize) -> &[Outcome] {
        &self.candidates[k]
    }

    fn label_point(&self, k: usize) -> usize {
        self.offsets[k] + self.label_pos[k]
    }

    fn kernel_row(&self, kernel: &KernelConfig, p: usize) -> Vec<S> {
        let (kp, op, sp) = (self.point_example[p], self.point_outcome[p], self.self_inner[p]);
        (0..self.num_points())
            .into_par_iter()
            .map(|q| {
                let z = self.store.inner(kp, op, self.point_example[q], self.point_outcome[q]);
                kernel_eval(kernel, z, sp, self.self_inner[q])
            })
            .collect()
    }
}

/// Per-run record of the training loop.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub passes: usize,
    pub converged: bool,
    /// Dual objective after each pass's solve.
    pub objective_history: Vec<f64>,
    /// Candidate outcomes scored by the separation oracle.
    pub oracle_evaluations: u64,
    pub working_set: usize,
    pub solver_residual: f64,
    /// Largest `Σ_{c ∈ k} α_c - C/ℓ` seen after any pass.
    pub max_box_excess: f64,
    pub min_alpha: f64,
    /// Primal slack of the returned `w` over the full candidate set, per example.
    pub slacks: Vec<f64>,
    /// Slack over the working set only, per example.
    pub working_slacks: Vec<f64>,
}

/// Training example stored inside a model.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SupportExample<S> {
    /// Preprocessed profile: agent 1 first, others transformed.
    pub profile: TypeProfile<S>,
    pub label: Outcome,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SupportConstraint<S> {
    pub example: usize,
    pub outcome: Outcome,
    pub alpha: S,
}

/// Dual-form admissible classifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel<S> {
    pub config: TrainingConfig,
    pub domain: Domain,
    pub preprocess: Preprocess,
    pub train_size: usize,
    pub w1: S,
    pub examples: Vec<SupportExample<S>>,
    pub constraints: Vec<SupportConstraint<S>>,
    pub diagnostics: TrainingDiagnostics,
    #[serde(skip)]
    cache: OnceLock<ModelCache<S>>,
}

#[derive(Clone, Debug)]
struct ModelCache<S> {
    features: Vec<InstanceFeatures<S>>,
    /// Per example, `(outcome, net coefficient, self inner product)`.
    points: Vec<Vec<(Outcome, S, S)>>,
}

impl<S: Scalar> TrainedModel<S> {
    /// `w1 > 0`; models failing this are discarded.
    pub fn is_admissible(&self) -> bool {
        self.w1 > S::zero()
    }

    pub fn map(&self) -> AttributeMapKind {
        self.config.map
    }

    fn cache(&self) -> &ModelCache<S> {
        self.cache.get_or_init(|| {
            let features: Vec<InstanceFeatures<S>> = self.examples.iter().map(|e| InstanceFeatures::new(&e.profile.others(0))).collect();
            let mut coef: Vec<HashMap<Outcome, S>> = vec![HashMap::new(); self.examples.len()];
            for c in &self.constraints {
                let label = self.examples[c.example].label;
                *coef[c.example].entry(label).or_insert(S::zero()) += c.alpha;
                *coef[c.example].entry(c.outcome).or_insert(S::zero()) -= c.alpha;
            }
            let points = coef
                .into_iter()
                .zip(&features)
                .map(|(m, f)| {
                    let mut table = vec![S::zero(); f.table_len()];
                    fill_pair_table(f, f, &mut table);
                    let mut v: Vec<(Outcome, S, S)> = m
                        .into_iter()
                        .filter(|(_, b)| *b != S::zero())
                        .map(|(o, b)| (o, b, table_inner(self.config.map, &table, o, o)))
                        .collect();
                    v.sort_by(|a, b| a.0.cmp(&b.0));
                    v
                })
                .collect();
            ModelCache { features, points }
        })
    }

    /// `w_{-1}ᵀψ'(θ_{-1}, o)` for each candidate; `others` must already be
    /// preprocessed.
    pub fn kernel_part(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S> {
        let cache = self.cache();
        let map = self.config.map;
        let kernel = self.config.kernel;
        let new = InstanceFeatures::new(others);
        let len = new.table_len();
        let mut own = vec![S::zero(); len];
        fill_pair_table(&new, &new, &mut own);
        let self_new: Vec<S> = candidates.iter().map(|&o| table_inner(map, &own, o, o)).collect();
        let mut out = vec![S::zero(); candidates.len()];
        let mut table = vec![S::zero(); len];
        for (feat, pts) in cache.features.iter().zip(&cache.points) {
            if pts.is_empty() {
                continue;
            }
            fill_pair_table(feat, &new, &mut table);
            for (j, &o) in candidates.iter().enumerate() {
                let mut acc = S::zero();
                for &(po, beta, ps) in pts {
                    acc += beta * kernel_eval(&kernel, table_inner(map, &table, po, o), ps, self_new[j]);
                }
                out[j] += acc;
            }
        }
        out
    }

    /// `f_w(θ, o)` for each candidate in the model's (preprocessed) space.
    pub fn scores(&self, own: &AgentType<S>, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S> {
        self.kernel_part(others, candidates)
            .into_iter()
            .zip(candidates)
            .map(|(k, &o)| self.w1 * own.value(o) + k)
            .collect()
    }

    /// `f_w(θ, o)` for a raw profile: `θ_{-1}` is preprocessed and the own
    /// type scaled by the same multiplier.
    pub fn discriminant(&self, profile: &TypeProfile<S>, o: Outcome) -> S {
        let (others, m) = self.preprocess.apply(&profile.others(0));
        let own = profile.agent(0).scaled(m);
        self.scores(&own, &others, &[o])[0]
    }

    /// `t_w = -(1/w1) w_{-1}ᵀψ'` on preprocessed input, unnormalised.
    pub fn raw_prices(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Result<Vec<S>> {
        if !self.is_admissible() {
            return Err(Error::NonPositiveW1(self.w1.as_f64()));
        }
        let inv = -S::one() / self.w1;
        Ok(self.kernel_part(others, candidates).into_iter().map(|k| k * inv).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Trains on a dataset with the configuration's map and oracle.
pub fn train<S: Scalar>(dataset: &Dataset<S>, config: &TrainingConfig) -> Result<TrainedModel<S>> {
    let set = TrainingSet::new(dataset, config.map, config.oracle)?;
    train_on(&set, config)
}

/// Constraint generation on a prepared training set.
///
/// Each pass scores every candidate of every example under the current
/// model, adds the most violated constraint of each example whose violation
/// exceeds its working-set slack by more than `ε`, and re-solves the dual
/// from the previous solution. The loop ends after a pass that adds nothing.
pub fn train_on<S: Scalar>(set: &TrainingSet<S>, config: &TrainingConfig) -> Result<TrainedModel<S>> {
    config.validate()?;
    if config.map != set.map || config.oracle != set.oracle {
        return Err(Error::Config("training set was prepared for a different map or oracle".into()));
    }
    let ell = set.len();
    let bound = S::lit(config.c / ell as f64);
    let eps = S::lit(config.epsilon);
    let mut solver = DualSolver::new(ell, bound, S::lit(config.solver_tol) * bound, config.seed);
    let mut rows: HashMap<usize, Vec<S>> = HashMap::new();
    // Constraint c: (label point, alternative point, v1 difference).
    let mut cons: Vec<(usize, usize, S)> = Vec::new();
    let mut in_set: HashSet<(usize, usize)> = HashSet::new();
    let mut diag = TrainingDiagnostics { min_alpha: 0.0, ..Default::default() };

    for _pass in 0..config.max_passes {
        diag.passes += 1;
        let alpha = solver.alpha().to_vec();
        let mut beta: HashMap<usize, S> = HashMap::new();
        for (c, &(a, b, _)) in cons.iter().enumerate() {
            if alpha[c] > S::zero() {
                *beta.entry(a).or_insert(S::zero()) += alpha[c];
                *beta.entry(b).or_insert(S::zero()) -= alpha[c];
            }
        }
        let w1 = compute_w1(&alpha, &cons.iter().map(|c| c.2).collect::<Vec<_>>());
        let mut f: Vec<S> = set.values.iter().map(|&v| w1 * v).collect();
        let mut beta_sorted: Vec<(usize, S)> = beta.into_iter().filter(|(_, b)| *b != S::zero()).collect();
        beta_sorted.sort_by_key(|&(p, _)| p);
        for &(p, b) in &beta_sorted {
            let row = rows.entry(p).or_insert_with(|| set.kernel_row(&config.kernel, p));
            for (fq, &r) in f.iter_mut().zip(row.iter()) {
                *fq += b * r;
            }
        }

        let mut added = 0usize;
        for k in 0..ell {
            let (lo, hi) = (set.offsets[k], set.offsets[k + 1]);
            diag.oracle_evaluations += (hi - lo) as u64;
            let (pos, violation) = separation_oracle(&set.candidates[k], &f[lo..hi], set.labels[k], &config.loss)?;
            let alt = lo + pos;
            if pos == set.label_pos[k] || in_set.contains(&(k, alt)) {
                continue;
            }
            if violation > solver.slack(k) + eps {
                let a = set.label_point(k);
                let dv = set.values[a] - set.values[alt];
                for p in [a, alt] {
                    rows.entry(p).or_insert_with(|| set.kernel_row(&config.kernel, p));
                }
                let (ra, rb) = (&rows[&a], &rows[&alt]);
                let mut column: Vec<S> = cons
                    .iter()
                    .map(|&(a2, b2, dv2)| dv * dv2 + ra[a2] - ra[b2] - rb[a2] + rb[b2])
                    .collect();
                column.push(dv * dv + ra[a] - S::lit(2.0) * ra[alt] + rb[alt]);
                let loss = config.loss.eval::<S>(set.labels[k], set.point_outcome[alt]);
                solver.add(k, loss, column);
                cons.push((a, alt, dv));
                in_set.insert((k, alt));
                added += 1;
            }
        }
        if added == 0 {
            diag.converged = true;
            break;
        }
        let sol = solver.solve();
        diag.objective_history.push(sol.objective.as_f64());
        diag.solver_residual = sol.residual.as_f64();
        for k in 0..ell {
            let excess = (solver.group_mass(k) - bound).as_f64();
            diag.max_box_excess = diag.max_box_excess.max(excess);
        }
        diag.min_alpha = diag.min_alpha.min(sol.alpha.iter().map(|a| a.as_f64()).fold(0.0, f64::min));
    }

    let alpha = solver.alpha().to_vec();
    let w1 = compute_w1(&alpha, &cons.iter().map(|c| c.2).collect::<Vec<_>>());
    diag.working_set = cons.len();
    diag.working_slacks = (0..ell).map(|k| solver.slack(k).as_f64()).collect();

    let mut example_index: HashMap<usize, usize> = HashMap::new();
    let mut examples = Vec::new();
    let mut constraints = Vec::new();
    for (c, &(_, b, _)) in cons.iter().enumerate() {
        if alpha[c] > S::zero() {
            let k = set.point_example[b];
            let idx = *example_index.entry(k).or_insert_with(|| {
                examples.push(SupportExample { profile: set.views[k].clone(), label: set.labels[k] });
                examples.len() - 1
            });
            constraints.push(SupportConstraint { example: idx, outcome: set.point_outcome[b], alpha: alpha[c] });
        }
    }
    let mut model = TrainedModel {
        config: *config,
        domain: set.domain,
        preprocess: set.preprocess,
        train_size: ell,
        w1,
        examples,
        constraints,
        diagnostics: diag,
        cache: OnceLock::new(),
    };
    model.diagnostics.slacks = full_slacks(&model, set, &config.loss);
    Ok(model)
}

/// `max(0, max_o 𝓛(o^k, o) + f(o) - f(o^k))` over the full candidate set.
fn full_slacks<S: Scalar>(model: &TrainedModel<S>, set: &TrainingSet<S>, loss: &Loss) -> Vec<f64> {
    let full = set.domain.candidates();
    (0..set.len())
        .into_par_iter()
        .map(|k| {
            let view = &set.views[k];
            let scores = model.scores(view.agent(0), &view.others(0), &full);
            let (_, h) = separation_oracle(&full, &scores, set.labels[k], loss).expect("label in full set");
            h.max(S::zero()).as_f64()
        })
        .collect()
}

/// Preprocessed training views of a dataset, for diagnostics.
pub fn training_views<S: Scalar>(dataset: &Dataset<S>) -> Result<Vec<TypeProfile<S>>> {
    (0..dataset.len())
        .map(|k| {
            let (own, others, _) = dataset.training_view(k);
            TypeProfile::from_parts(own, others)
        })
        .collect()
}
