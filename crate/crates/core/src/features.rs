//! Attribute maps, their inner products, and kernels.
//!
//! A multi-minded bid with desired bundles `S_1..S_b` implicitly defines the
//! valuation vector `x[B] = max { v_j : S_j ⊆ B }` over all `2^r` bundles.
//! By the maximum-minimums identity
//!
//! ```text
//! x[B] = Σ_{∅≠T, S_j⊆B ∀j∈T} (-1)^{|T|+1} min_{j∈T} v_j
//! ```
//!
//! so `⟨x, x'⟩ = Σ_{T,T'} (-1)^{|T|+|T'|} min_T min_T' 2^{r - |∪T ∪ ∪T'|}`.
//! Every nonempty subset `T` of a bid becomes one [`Term`] carrying its
//! union, its minimum and its sign.
//!
//! `χ2` zeroes the entries of bundles meeting `o_1`. For two points the
//! surviving bundles are those disjoint from `M = o_1 ∪ o_1'`; a term whose
//! union meets `M` never fits inside such a bundle, and the others count
//! `2^{(r-|M|) - |U|}` bundles. `χ1` places the stacked vectors in the block
//! of `o_1`, so points with different outcomes are orthogonal.
//!
//! For batch work the per-agent term products of two instances are folded
//! into `h[U]` and expanded once by a weighted zeta transform:
//! `F[Q] = Σ_{U⊆Q} h[U] 2^{|Q|-|U|}`. Then `χ2(o,o') = F[full \ (o∪o')]` and
//! `χ1(o,o') = [o = o'] F[full]`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Bundle, Domain, MultiMindedBid, OthersProfile, Outcome};
use crate::scalar::{Pow2Table, Scalar, Value};

/// Attribute map `χ` applied to `(θ_{-1}, o_1)`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeMapKind {
    Chi1,
    Chi2,
    Chi3,
}

impl AttributeMapKind {
    pub fn name(self) -> &'static str {
        match self {
            AttributeMapKind::Chi1 => "chi1",
            AttributeMapKind::Chi2 => "chi2",
            AttributeMapKind::Chi3 => "chi3",
        }
    }

    pub fn supports(self, domain: Domain) -> bool {
        match self {
            AttributeMapKind::Chi1 | AttributeMapKind::Chi2 => domain.is_bundle_domain(),
            AttributeMapKind::Chi3 => !domain.is_bundle_domain(),
        }
    }
}

impl fmt::Display for AttributeMapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel over attribute vectors, expressed through inner products.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    Linear,
    Polynomial { degree: u32 },
    Rbf { gamma: f64 },
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelConfig::Polynomial { degree } if degree == 0 => Err(Error::Config("polynomial degree must be ≥ 1".into())),
            KernelConfig::Rbf { gamma } if !(gamma > 0.0) => Err(Error::Config(format!("rbf gamma must be > 0, got {gamma}"))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            KernelConfig::Linear => "linear".into(),
            KernelConfig::Polynomial { degree } => format!("poly{degree}"),
            KernelConfig::Rbf { .. } => "rbf".into(),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            KernelConfig::Rbf { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// Whether evaluation needs the self inner products `zz`, `z'z'`.
    pub fn needs_norms(&self) -> bool {
        matches!(self, KernelConfig::Rbf { .. })
    }
}

/// `K(z, z')` from `zz' = ⟨z,z'⟩`, `zz = ⟨z,z⟩` and `z'z' = ⟨z',z'⟩`.
#[inline]
pub fn kernel_eval<S: Scalar>(cfg: &KernelConfig, zzp: S, zz: S, zpzp: S) -> S {
    match *cfg {
        KernelConfig::Linear => zzp,
        KernelConfig::Polynomial { degree } => zzp.powi(degree as i32),
        KernelConfig::Rbf { gamma } => {
            let d2 = zz + zpzp - S::lit(2.0) * zzp;
            (-S::lit(gamma) * d2.max(S::zero())).exp()
        }
    }
}

/// Nonempty subset of a bid's desired bundles.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Term<V> {
    pub union: Bundle,
    pub min: V,
    /// `true` when `|T|` is odd.
    pub positive: bool,
}

/// All `2^b - 1` subset terms of one bid.
#[derive(Clone, Debug, PartialEq)]
pub struct BidTerms<V> {
    terms: Vec<Term<V>>,
}

impl<V: Value> BidTerms<V> {
    pub fn new(bid: &MultiMindedBid<V>) -> Self {
        let bids = bid.bids();
        assert!(bids.len() < 20, "too many desired bundles for subset expansion");
        let mut terms = Vec::with_capacity((1usize << bids.len()).saturating_sub(1));
        for mask in 1usize..(1 << bids.len()) {
            let mut union = Bundle::EMPTY;
            let mut min: Option<V> = None;
            for (j, &(s, v)) in bids.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    union = union.union(s);
                    min = Some(match min {
                        Some(m) if m < v => m,
                        _ => v,
                    });
                }
            }
            terms.push(Term {
                union,
                min: min.unwrap_or(V::zero()),
                positive: mask.count_ones() % 2 == 1,
            });
        }
        BidTerms { terms }
    }

    pub fn terms(&self) -> &[Term<V>] {
        &self.terms
    }
}

/// `max(values) = Σ_{∅≠Z} (-1)^{|Z|+1} min_Z`, evaluated by subset expansion.
pub fn max_min_identity<V: Value>(values: &[V]) -> V {
    let mut total = V::zero();
    for mask in 1usize..(1 << values.len()) {
        let mut min: Option<V> = None;
        for (j, &v) in values.iter().enumerate() {
            if mask & (1 << j) != 0 {
                min = Some(match min {
                    Some(m) if m < v => m,
                    _ => v,
                });
            }
        }
        let m = min.unwrap_or(V::zero());
        if mask.count_ones() % 2 == 1 {
            total = total + m;
        } else {
            total = total - m;
        }
    }
    total
}

fn signed_product<V: Value>(a: &Term<V>, b: &Term<V>) -> V {
    let p = a.min * b.min;
    if a.positive == b.positive {
        p
    } else {
        V::zero() - p
    }
}

/// Masked product of two term lists: bundles meeting `mask` are dropped.
fn masked_terms_inner<V: Value>(a: &BidTerms<V>, b: &BidTerms<V>, r: usize, mask: Bundle, pow2: &Pow2Table<V>) -> V {
    let free = r as u32 - mask.len();
    let mut total = V::zero();
    for ta in a.terms.iter().filter(|t| !t.union.intersects(mask)) {
        for tb in b.terms.iter().filter(|t| !t.union.intersects(mask)) {
            let e = free - ta.union.union(tb.union).len();
            total = total + signed_product(ta, tb) * pow2.get(e);
        }
    }
    total
}

/// Inner product of the implicit `2^r`-dimensional valuation vectors.
pub fn mm_inner<V: Value>(a: &MultiMindedBid<V>, b: &MultiMindedBid<V>, r: usize) -> V {
    let pow2 = Pow2Table::new(r as u32);
    masked_terms_inner(&BidTerms::new(a), &BidTerms::new(b), r, Bundle::EMPTY, &pow2)
}

fn others_bids<V: Value>(others: &OthersProfile<V>) -> Vec<&MultiMindedBid<V>> {
    others
        .agents()
        .iter()
        .map(|a| a.as_bid().expect("bundle-domain attribute map on non-bid profile"))
        .collect()
}

fn outcome_bundle(o: Outcome) -> Bundle {
    o.bundle().expect("bundle-domain attribute map on item outcome")
}

/// `⟨χ1(θ_{-1}, o), χ1(θ'_{-1}, o')⟩`.
pub fn chi1_inner<V: Value>(a: &OthersProfile<V>, o: Outcome, b: &OthersProfile<V>, o2: Outcome) -> V {
    if o != o2 {
        return V::zero();
    }
    let r = a.domain().items();
    others_bids(a)
        .iter()
        .zip(others_bids(b))
        .fold(V::zero(), |acc, (x, y)| acc + mm_inner(x, y, r))
}

/// `⟨χ2(θ_{-1}, o), χ2(θ'_{-1}, o')⟩`.
pub fn chi2_inner<V: Value>(a: &OthersProfile<V>, o: Outcome, b: &OthersProfile<V>, o2: Outcome) -> V {
    let r = a.domain().items();
    let mask = outcome_bundle(o).union(outcome_bundle(o2));
    let pow2 = Pow2Table::new(r as u32);
    others_bids(a).iter().zip(others_bids(b)).fold(V::zero(), |acc, (x, y)| {
        acc + masked_terms_inner(&BidTerms::new(x), &BidTerms::new(y), r, mask, &pow2)
    })
}

/// `χ3(θ_{-1}, j)`: each other agent's valuation with entry `j` removed, concatenated.
pub fn chi3_attrs<V: Value>(others: &OthersProfile<V>, j: usize) -> Vec<V> {
    let mut out = Vec::new();
    for a in others.agents() {
        let row = a.as_assignment().expect("chi3 on non-assignment profile").values();
        out.extend(row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v));
    }
    out
}

/// `⟨χ(p), χ(q)⟩` for any map, evaluated directly from the profiles.
pub fn attr_inner<V: Value>(map: AttributeMapKind, a: &OthersProfile<V>, o: Outcome, b: &OthersProfile<V>, o2: Outcome) -> V {
    match map {
        AttributeMapKind::Chi1 => chi1_inner(a, o, b, o2),
        AttributeMapKind::Chi2 => chi2_inner(a, o, b, o2),
        AttributeMapKind::Chi3 => {
            let x = chi3_attrs(a, o.item().expect("chi3 needs item outcomes"));
            let y = chi3_attrs(b, o2.item().expect("chi3 needs item outcomes"));
            x.iter().zip(&y).fold(V::zero(), |acc, (&p, &q)| acc + p * q)
        }
    }
}

/// Joint feature point `ψ(θ, o) = (v_1(θ_1, o), ψ'(θ_{-1}, o))`.
#[derive(Clone, Debug)]
pub struct JointPoint<'a, S> {
    pub value: S,
    pub map: AttributeMapKind,
    pub others: &'a OthersProfile<S>,
    pub outcome: Outcome,
}

/// `v_1 v_1' + K(χ, χ')`; the value coordinate is never kernelized.
pub fn joint_kernel<S: Scalar>(cfg: &KernelConfig, a: &JointPoint<'_, S>, b: &JointPoint<'_, S>) -> Result<S> {
    if a.map != b.map {
        return Err(Error::Config(format!("attribute map mismatch: {} vs {}", a.map, b.map)));
    }
    let zzp = attr_inner(a.map, a.others, a.outcome, b.others, b.outcome);
    let (zz, zpzp) = if cfg.needs_norms() {
        (
            attr_inner(a.map, a.others, a.outcome, a.others, a.outcome),
            attr_inner(b.map, b.others, b.outcome, b.others, b.outcome),
        )
    } else {
        (S::zero(), S::zero())
    };
    Ok(a.value * b.value + kernel_eval(cfg, zzp, zz, zpzp))
}

/// Preprocessed `θ_{-1}` for batch inner products.
#[derive(Clone, Debug)]
pub enum InstanceFeatures<V> {
    Bids { items: usize, agents: Vec<BidTerms<V>> },
    Rows { n: usize, agents: Vec<Vec<V>> },
}

impl<V: Value> InstanceFeatures<V> {
    pub fn new(others: &OthersProfile<V>) -> Self {
        match others.domain() {
            Domain::Assignment { agents } => InstanceFeatures::Rows {
                n: agents,
                agents: others
                    .agents()
                    .iter()
                    .map(|a| a.as_assignment().expect("assignment profile").values().to_vec())
                    .collect(),
            },
            d => InstanceFeatures::Bids {
                items: d.items(),
                agents: others_bids(others).into_iter().map(BidTerms::new).collect(),
            },
        }
    }

    /// Entries in one pair table.
    pub fn table_len(&self) -> usize {
        match self {
            InstanceFeatures::Bids { items, .. } => 1 << items,
            InstanceFeatures::Rows { n, .. } => n * n,
        }
    }
}

/// Fills `out` with the pair table of two instances (see the module docs).
///
/// Bid instances get `F[Q]`; assignment instances get the `n × n` matrix of
/// `⟨χ3(a, j), χ3(b, j')⟩` at `j * n + j'`.
pub fn fill_pair_table<V: Value>(a: &InstanceFeatures<V>, b: &InstanceFeatures<V>, out: &mut [V]) {
    match (a, b) {
        (InstanceFeatures::Bids { items, agents: xa }, InstanceFeatures::Bids { agents: xb, .. }) => {
            let size = 1usize << items;
            debug_assert_eq!(out.len(), size);
            out.iter_mut().for_each(|v| *v = V::zero());
            for (ta, tb) in xa.iter().zip(xb) {
                for p in ta.terms() {
                    for q in tb.terms() {
                        let u = p.union.union(q.union).index();
                        out[u] = out[u] + signed_product(p, q);
                    }
                }
            }
            let two = V::one() + V::one();
            for j in 0..*items {
                let bit = 1usize << j;
                for q in 0..size {
                    if q & bit != 0 {
                        out[q] = out[q] + two * out[q ^ bit];
                    }
                }
            }
        }
        (InstanceFeatures::Rows { n, agents: ra }, InstanceFeatures::Rows { agents: rb, .. }) => {
            let n = *n;
            debug_assert_eq!(out.len(), n * n);
            for j in 0..n {
                for jp in 0..n {
                    let mut acc = V::zero();
                    for (x, y) in ra.iter().zip(rb) {
                        let xs = x.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, v)| v);
                        let ys = y.iter().enumerate().filter(|&(k, _)| k != jp).map(|(_, v)| v);
                        for (&p, &q) in xs.zip(ys) {
                            acc = acc + p * q;
                        }
                    }
                    out[j * n + jp] = acc;
                }
            }
        }
        _ => panic!("pair table between instances of different domains"),
    }
}

/// Reads `⟨χ(a, o), χ(b, o')⟩` off a pair table built by [`fill_pair_table`].
#[inline]
pub fn table_inner<V: Value>(map: AttributeMapKind, table: &[V], o: Outcome, o2: Outcome) -> V {
    match map {
        AttributeMapKind::Chi1 => {
            if o == o2 {
                table[table.len() - 1]
            } else {
                V::zero()
            }
        }
        AttributeMapKind::Chi2 => {
            let full = table.len() - 1;
            table[full & !(o.index() | o2.index())]
        }
        AttributeMapKind::Chi3 => {
            let n = (table.len() as f64).sqrt().round() as usize;
            table[o.index() * n + o2.index()]
        }
    }
}

/// Pair tables for every unordered pair of a fixed instance set.
pub struct PairTableStore<S> {
    map: AttributeMapKind,
    stride: usize,
    count: usize,
    data: Vec<S>,
}

impl<S: Scalar> PairTableStore<S> {
    pub fn new(map: AttributeMapKind, instances: &[InstanceFeatures<S>]) -> Self {
        let count = instances.len();
        let stride = instances.first().map_or(1, |f| f.table_len());
        let pairs = count * (count + 1) / 2;
        let mut data = vec![S::zero(); pairs * stride];
        data.par_chunks_mut(stride).enumerate().for_each(|(idx, chunk)| {
            let (k, kp) = unrank_pair(idx);
            fill_pair_table(&instances[k], &instances[kp], chunk);
        });
        PairTableStore { map, stride, count, data }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `⟨χ(θ^k, o), χ(θ^{k'}, o')⟩`.
    #[inline]
    pub fn inner(&self, k: usize, o: Outcome, kp: usize, op: Outcome) -> S {
        if k <= kp {
            let idx = kp * (kp + 1) / 2 + k;
            table_inner(self.map, &self.data[idx * self.stride..(idx + 1) * self.stride], o, op)
        } else {
            let idx = k * (k + 1) / 2 + kp;
            table_inner(self.map, &self.data[idx * self.stride..(idx + 1) * self.stride], op, o)
        }
    }
}

/// Inverse of `idx = kp (kp + 1) / 2 + k` with `k ≤ kp`.
fn unrank_pair(idx: usize) -> (usize, usize) {
    let mut kp = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while kp * (kp + 1) / 2 > idx {
        kp -= 1;
    }
    while (kp + 1) * (kp + 2) / 2 <= idx {
        kp += 1;
    }
    (idx - kp * (kp + 1) / 2, kp)
}
