//! Price functions: learned rules with normalization, offsets and the
//! deallocation fix, plus VCG-style baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Allocation, Bundle, Domain, OthersProfile, Outcome, PriceFunction, TypeProfile};
use crate::outcomes::{assignment_rows, egalitarian_injection, max_welfare_injection, others_welfare};
use crate::scalar::Scalar;
use crate::trainer::TrainedModel;

/// Unnormalised learned price `t_w(θ_{-1}, o)` in the original value scale.
pub fn learned_price<S: Scalar>(model: &TrainedModel<S>, others: &OthersProfile<S>, o: Outcome) -> Result<S> {
    Ok(learned_raw_prices(model, others, &[o])?[0])
}

fn learned_raw_prices<S: Scalar>(model: &TrainedModel<S>, others: &OthersProfile<S>, candidates: &[Outcome]) -> Result<Vec<S>> {
    let (pre, m) = model.preprocess.apply(others);
    Ok(model.raw_prices(&pre, candidates)?.into_iter().map(|t| t / m).collect())
}

/// Index of the baseline outcome `o_b`: the null outcome if the domain has
/// one, otherwise the cheapest candidate (lowest index on ties).
pub fn baseline_index<S: Scalar>(domain: Domain, candidates: &[Outcome], prices: &[S]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(null) = domain.null_outcome() {
        return candidates
            .iter()
            .position(|&o| o == null)
            .ok_or_else(|| Error::OutcomeNotCandidate(null.to_string()));
    }
    let min = prices.iter().copied().fold(S::infinity(), S::min);
    Ok(prices.iter().position(|&p| p <= min + S::tol()).unwrap_or(0))
}

/// `t'(o) = max(0, t(o) - t(o_b))`; returns the prices and the index of `o_b`.
pub fn normalize<S: Scalar>(domain: Domain, candidates: &[Outcome], raw: &[S]) -> Result<(Vec<S>, usize)> {
    let b = baseline_index(domain, candidates, raw)?;
    let base = raw[b];
    let mut out: Vec<S> = raw.iter().map(|&t| (t - base).max(S::zero())).collect();
    out[b] = S::zero();
    Ok((out, b))
}

/// Lowers every price except the baseline's by `offset`, clamped at 0.
pub fn apply_offset<S: Scalar>(prices: &[S], offset: S, baseline: usize) -> Vec<S> {
    prices
        .iter()
        .enumerate()
        .map(|(j, &p)| if j == baseline { p } else { (p - offset).max(S::zero()) })
        .collect()
}

/// Learned price rule with payment normalization and an optional offset.
#[derive(Clone, Debug)]
pub struct LearnedPriceRule<'a, S> {
    model: &'a TrainedModel<S>,
    offset: S,
    full: Vec<Outcome>,
}

impl<'a, S: Scalar> LearnedPriceRule<'a, S> {
    pub fn new(model: &'a TrainedModel<S>, offset: S) -> Result<Self> {
        if !model.is_admissible() {
            return Err(Error::NonPositiveW1(model.w1.as_f64()));
        }
        if offset < S::zero() {
            return Err(Error::Config("offset must be ≥ 0".into()));
        }
        Ok(LearnedPriceRule { model, offset, full: model.domain.candidates() })
    }

    pub fn model(&self) -> &TrainedModel<S> {
        self.model
    }

    pub fn with_offset(&self, offset: S) -> Self {
        LearnedPriceRule { offset, ..self.clone() }
    }

    /// Normalised, offset prices over the full outcome set.
    pub fn full_prices(&self, others: &OthersProfile<S>) -> Vec<S> {
        let raw = learned_raw_prices(self.model, others, &self.full).expect("admissibility checked at construction");
        let (norm, b) = normalize(self.model.domain, &self.full, &raw).expect("full candidate set contains baseline");
        apply_offset(&norm, self.offset, b)
    }
}

impl<S: Scalar> PriceFunction<S> for LearnedPriceRule<'_, S> {
    fn prices(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S> {
        let full = self.full_prices(others);
        if candidates == self.full.as_slice() {
            return full;
        }
        candidates
            .iter()
            .map(|o| self.full.iter().position(|f| f == o).map_or(S::zero(), |j| full[j]))
            .collect()
    }
}

/// VCG-style baseline price rules.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Externality on others' optimal welfare (bundle domains).
    VcgCa,
    /// Externality on others' maximum-weight assignment.
    VcgAssignment,
    /// Externality on others' total welfare under the egalitarian assignment.
    TotVcg,
    /// Externality on others' minimum value under the egalitarian assignment.
    EgVcg,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::VcgCa | BaselineKind::VcgAssignment => "vcg",
            BaselineKind::TotVcg => "tot-vcg",
            BaselineKind::EgVcg => "eg-vcg",
        }
    }

    pub fn supports(self, domain: Domain) -> bool {
        match self {
            BaselineKind::VcgCa => domain.is_bundle_domain(),
            _ => !domain.is_bundle_domain(),
        }
    }

    /// Baselines reported alongside learned rules for a domain.
    pub fn defaults_for(domain: Domain) -> Vec<BaselineKind> {
        if domain.is_bundle_domain() {
            vec![BaselineKind::VcgCa]
        } else {
            vec![BaselineKind::VcgAssignment, BaselineKind::TotVcg, BaselineKind::EgVcg]
        }
    }
}

/// `p(θ_{-1}, o)` for a baseline, clamped at 0.
pub fn baseline_price<S: Scalar>(kind: BaselineKind, others: &OthersProfile<S>, o: Outcome) -> Result<S> {
    Ok(BaselinePrice::new(kind, others.domain())?.prices(others, &[o])[0])
}

/// Baseline as a [`PriceFunction`].
#[derive(Copy, Clone, Debug)]
pub struct BaselinePrice {
    kind: BaselineKind,
}

impl BaselinePrice {
    pub fn new(kind: BaselineKind, domain: Domain) -> Result<Self> {
        if !kind.supports(domain) {
            return Err(Error::DomainMismatch(format!("baseline {} on domain {}", kind.name(), domain.name())));
        }
        Ok(BaselinePrice { kind })
    }
}

impl<S: Scalar> PriceFunction<S> for BaselinePrice {
    fn prices(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S> {
        let domain = others.domain();
        match self.kind {
            BaselineKind::VcgCa => {
                let full = Bundle::full(domain.items());
                let all = others_welfare(others, full);
                candidates
                    .iter()
                    .map(|o| {
                        let b = o.bundle().expect("bundle outcome");
                        (all - others_welfare(others, full.minus(b))).max(S::zero())
                    })
                    .collect()
            }
            kind => {
                let rows = assignment_rows(others.agents().iter().map(|a| a.as_assignment().map(|v| v.values())))
                    .expect("assignment profile");
                let n = domain.items();
                let all_items: Vec<usize> = (0..n).collect();
                let measure = |items: &[usize]| -> S {
                    match kind {
                        BaselineKind::VcgAssignment => max_welfare_injection(&rows, items),
                        _ => {
                            let inj = egalitarian_injection(&rows, items).expect("assignment size within bound");
                            let vals = inj.iter().enumerate().map(|(a, &j)| rows[a][j]);
                            if kind == BaselineKind::TotVcg {
                                vals.sum()
                            } else {
                                vals.fold(S::infinity(), S::min)
                            }
                        }
                    }
                };
                let base = measure(&all_items);
                candidates
                    .iter()
                    .map(|o| {
                        let j = o.item().expect("item outcome");
                        let rest: Vec<usize> = all_items.iter().copied().filter(|&i| i != j).collect();
                        (base - measure(&rest)).max(S::zero())
                    })
                    .collect()
            }
        }
    }
}

/// Resets every agent with negative truthful utility to the null outcome at
/// price 0. Returns the new allocation, payments and
/// `welfare(after) / welfare(before)` (1 when welfare before is 0).
pub fn deallocate_fix<S: Scalar>(profile: &TypeProfile<S>, allocation: &Allocation, payments: &[S]) -> Result<(Allocation, Vec<S>, S)> {
    let domain = profile.domain();
    let Some(null) = domain.null_outcome() else {
        return Err(Error::DomainMismatch("deallocation needs a null outcome".into()));
    };
    let before = allocation.welfare(profile);
    let mut after = allocation.clone();
    let mut pay = payments.to_vec();
    for i in 0..profile.n() {
        let u = profile.value(i, allocation.get(i)) - payments[i];
        if u < -S::tol() {
            after.set(i, null);
            pay[i] = S::zero();
        }
    }
    let welfare = after.welfare(profile);
    let ratio = if before > S::zero() { welfare / before } else { S::one() };
    Ok((after, pay, ratio))
}
