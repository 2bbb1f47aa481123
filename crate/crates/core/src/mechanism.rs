//! Types, outcomes and the evaluation primitives every other module builds on.
//!
//! Agent 1 is always index 0. A price function only ever sees an
//! [`OthersProfile`], so agent-independence of prices holds by construction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Value};

/// Largest item count for which the full bundle lattice is enumerated.
pub const MAX_ITEMS: usize = 16;

/// Set of items as a bitmask; item `j` (1-based) is bit `j - 1`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(u32);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub const fn from_bits(bits: u32) -> Self {
        Bundle(bits)
    }

    /// Builds a bundle from 1-based item numbers.
    pub fn from_items(items: &[usize]) -> Self {
        Bundle(items.iter().fold(0u32, |acc, &j| {
            assert!(j >= 1 && j <= 32, "item {j} out of range");
            acc | (1 << (j - 1))
        }))
    }

    /// All items `1..=r`.
    pub fn full(r: usize) -> Self {
        if r >= 32 {
            Bundle(u32::MAX)
        } else {
            Bundle((1u32 << r) - 1)
        }
    }

    #[inline]
    pub const fn bits(self) -> u32 {
        self.0
    }

    /// Decimal index `Σ_{j ∈ S} 2^(j-1)`.
    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn len(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub const fn contains(self, item: usize) -> bool {
        item >= 1 && item <= 32 && self.0 & (1 << (item - 1)) != 0
    }

    #[inline]
    pub const fn is_subset_of(self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub const fn intersects(self, other: Bundle) -> bool {
        self.0 & other.0 != 0
    }

    #[inline]
    pub const fn union(self, other: Bundle) -> Bundle {
        Bundle(self.0 | other.0)
    }

    #[inline]
    pub const fn minus(self, other: Bundle) -> Bundle {
        Bundle(self.0 & !other.0)
    }

    /// 1-based items in ascending order.
    pub fn items(self) -> impl Iterator<Item = usize> {
        (0..32usize).filter(move |j| self.0 & (1 << j) != 0).map(|j| j + 1)
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.items().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// Partial outcome for a single agent.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Combinatorial auction bundle; in the single-item domain `{}` is
    /// "lose" and `{1}` is "win".
    Bundle(Bundle),
    /// 0-based item index in the assignment domain.
    Item(usize),
}

impl Outcome {
    pub const NULL: Outcome = Outcome::Bundle(Bundle::EMPTY);

    /// Position in the canonical candidate order, used for tie-breaking.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Outcome::Bundle(b) => b.index(),
            Outcome::Item(j) => j,
        }
    }

    pub fn is_null(self) -> bool {
        self == Outcome::NULL
    }

    pub fn bundle(self) -> Option<Bundle> {
        match self {
            Outcome::Bundle(b) => Some(b),
            Outcome::Item(_) => None,
        }
    }

    pub fn item(self) -> Option<usize> {
        match self {
            Outcome::Item(j) => Some(j),
            Outcome::Bundle(_) => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Bundle(b) => write!(f, "{b}"),
            Outcome::Item(j) => write!(f, "item {}", j + 1),
        }
    }
}

/// Multi-minded bid: up to `b` desired bundles with values; any other bundle
/// is worth the best desired bundle it contains.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MultiMindedBid<V> {
    bids: Vec<(Bundle, V)>,
}

impl<V: Value> MultiMindedBid<V> {
    pub fn new(bids: Vec<(Bundle, V)>) -> Result<Self> {
        for (i, (s, v)) in bids.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidBid("empty bundle listed".into()));
            }
            if *v < V::zero() {
                return Err(Error::InvalidBid(format!("negative value for {s}")));
            }
            if bids[..i].iter().any(|(t, _)| t == s) {
                return Err(Error::InvalidBid(format!("duplicate bundle {s}")));
            }
        }
        Ok(MultiMindedBid { bids })
    }

    /// Bid with no desired bundles (the zero valuation).
    pub fn empty() -> Self {
        MultiMindedBid { bids: Vec::new() }
    }

    pub fn single(bundle: Bundle, value: V) -> Result<Self> {
        Self::new(vec![(bundle, value)])
    }

    pub fn bids(&self) -> &[(Bundle, V)] {
        &self.bids
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    /// `max { v_j : S_j ⊆ o }`, or zero when no desired bundle fits.
    pub fn value_of(&self, o: Bundle) -> V {
        let mut best = V::zero();
        for &(s, v) in &self.bids {
            if s.is_subset_of(o) && v > best {
                best = v;
            }
        }
        best
    }

    pub fn max_value(&self) -> V {
        self.value_of(Bundle(u32::MAX))
    }

    /// Union of all desired bundles.
    pub fn support(&self) -> Bundle {
        self.bids.iter().fold(Bundle::EMPTY, |acc, (s, _)| acc.union(*s))
    }

    pub fn scaled(&self, factor: V) -> Self {
        MultiMindedBid {
            bids: self.bids.iter().map(|&(s, v)| (s, v * factor)).collect(),
        }
    }

    pub fn map_values<W: Value>(&self, f: impl Fn(V) -> W) -> MultiMindedBid<W> {
        MultiMindedBid {
            bids: self.bids.iter().map(|&(s, v)| (s, f(v))).collect(),
        }
    }
}

/// Assignment-domain type: value for each of the `n` items.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentValuation<V>(pub Vec<V>);

impl<V: Value> AssignmentValuation<V> {
    pub fn values(&self) -> &[V] {
        &self.0
    }

    pub fn max_value(&self) -> V {
        self.0
            .iter()
            .copied()
            .fold(V::zero(), |m, v| if v > m { v } else { m })
    }
}

/// One agent's reported type.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType<V> {
    Bid(MultiMindedBid<V>),
    Assignment(AssignmentValuation<V>),
}

impl<V: Value> AgentType<V> {
    /// `v_i(θ_i, o)`. Mismatched outcome kinds are worth zero.
    pub fn value(&self, o: Outcome) -> V {
        match (self, o) {
            (AgentType::Bid(b), Outcome::Bundle(s)) => b.value_of(s),
            (AgentType::Assignment(a), Outcome::Item(j)) => a.0.get(j).copied().unwrap_or(V::zero()),
            _ => V::zero(),
        }
    }

    /// Largest value the agent reports for anything.
    pub fn max_value(&self) -> V {
        match self {
            AgentType::Bid(b) => b.max_value(),
            AgentType::Assignment(a) => a.max_value(),
        }
    }

    pub fn scaled(&self, factor: V) -> Self {
        match self {
            AgentType::Bid(b) => AgentType::Bid(b.scaled(factor)),
            AgentType::Assignment(a) => {
                AgentType::Assignment(AssignmentValuation(a.0.iter().map(|&v| v * factor).collect()))
            }
        }
    }

    pub fn as_bid(&self) -> Option<&MultiMindedBid<V>> {
        match self {
            AgentType::Bid(b) => Some(b),
            AgentType::Assignment(_) => None,
        }
    }

    pub fn as_assignment(&self) -> Option<&AssignmentValuation<V>> {
        match self {
            AgentType::Assignment(a) => Some(a),
            AgentType::Bid(_) => None,
        }
    }
}

/// Problem domain; fixes the outcome space of every agent.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// One item; each agent is a single-minded bidder on `{1}`.
    SingleItem,
    /// Multi-minded combinatorial auction over `items` items.
    Ca { items: usize },
    /// `agents` agents and as many items, each agent gets exactly one.
    Assignment { agents: usize },
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::SingleItem => "single_item",
            Domain::Ca { .. } => "ca",
            Domain::Assignment { .. } => "assignment",
        }
    }

    /// Number of items.
    pub fn items(self) -> usize {
        match self {
            Domain::SingleItem => 1,
            Domain::Ca { items } => items,
            Domain::Assignment { agents } => agents,
        }
    }

    pub fn is_bundle_domain(self) -> bool {
        !matches!(self, Domain::Assignment { .. })
    }

    /// Outcome worth zero to every type, if the domain has one.
    pub fn null_outcome(self) -> Option<Outcome> {
        self.is_bundle_domain().then_some(Outcome::NULL)
    }

    /// Every partial outcome of agent 1, in tie-breaking order.
    pub fn candidates(self) -> Vec<Outcome> {
        match self {
            Domain::SingleItem => vec![Outcome::NULL, Outcome::Bundle(Bundle(1))],
            Domain::Ca { items } => (0..(1u32 << items)).map(|b| Outcome::Bundle(Bundle(b))).collect(),
            Domain::Assignment { agents } => (0..agents).map(Outcome::Item).collect(),
        }
    }

    fn check_agent<V: Value>(self, agent: &AgentType<V>, expected_agents: usize) -> Result<()> {
        match (self, agent) {
            (Domain::SingleItem, AgentType::Bid(b)) => {
                if b.len() > 1 || b.bids().iter().any(|(s, _)| *s != Bundle(1)) {
                    return Err(Error::InvalidProfile("single-item bids must be on {1}".into()));
                }
            }
            (Domain::Ca { items }, AgentType::Bid(b)) => {
                if items == 0 || items > MAX_ITEMS {
                    return Err(Error::InvalidProfile(format!("unsupported item count {items}")));
                }
                if !b.support().is_subset_of(Bundle::full(items)) {
                    return Err(Error::InvalidProfile(format!("bundle outside {items} items")));
                }
            }
            (Domain::Assignment { .. }, AgentType::Assignment(a)) => {
                if a.0.len() != expected_agents {
                    return Err(Error::InvalidProfile(format!(
                        "assignment valuation has {} entries, expected {expected_agents}",
                        a.0.len()
                    )));
                }
            }
            _ => return Err(Error::InvalidProfile(format!("agent type does not match domain {}", self.name()))),
        }
        Ok(())
    }
}

/// Reports of all agents; agent 1 is index 0.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TypeProfile<V> {
    domain: Domain,
    agents: Vec<AgentType<V>>,
}

impl<V: Value> TypeProfile<V> {
    pub fn new(domain: Domain, agents: Vec<AgentType<V>>) -> Result<Self> {
        if agents.len() < 2 {
            return Err(Error::InvalidProfile("need at least two agents".into()));
        }
        if let Domain::Assignment { agents: n } = domain {
            if n != agents.len() {
                return Err(Error::InvalidProfile(format!("domain has {n} agents, profile {}", agents.len())));
            }
        }
        for a in &agents {
            domain.check_agent(a, agents.len())?;
        }
        Ok(TypeProfile { domain, agents })
    }

    pub fn single_item(values: &[V]) -> Result<Self> {
        let agents = values
            .iter()
            .map(|&v| MultiMindedBid::single(Bundle(1), v).map(AgentType::Bid))
            .collect::<Result<Vec<_>>>()?;
        Self::new(Domain::SingleItem, agents)
    }

    pub fn ca(items: usize, bids: Vec<MultiMindedBid<V>>) -> Result<Self> {
        Self::new(Domain::Ca { items }, bids.into_iter().map(AgentType::Bid).collect())
    }

    pub fn assignment(rows: Vec<Vec<V>>) -> Result<Self> {
        let n = rows.len();
        Self::new(
            Domain::Assignment { agents: n },
            rows.into_iter().map(|r| AgentType::Assignment(AssignmentValuation(r))).collect(),
        )
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentType<V>] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentType<V> {
        &self.agents[i]
    }

    pub fn value(&self, i: usize, o: Outcome) -> V {
        self.agents[i].value(o)
    }

    /// `θ_{-i}` with the remaining agents in their original order.
    pub fn others(&self, i: usize) -> OthersProfile<V> {
        OthersProfile {
            domain: self.domain,
            agents: self
                .agents
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, a)| a.clone())
                .collect(),
        }
    }

    /// Recombines an own type with `θ_{-1}`; agent 1 comes first.
    pub fn from_parts(own: AgentType<V>, others: OthersProfile<V>) -> Result<Self> {
        let domain = others.domain;
        let mut agents = Vec::with_capacity(others.agents.len() + 1);
        agents.push(own);
        agents.extend(others.agents);
        Self::new(domain, agents)
    }

    pub fn scaled(&self, factor: V) -> Self {
        TypeProfile {
            domain: self.domain,
            agents: self.agents.iter().map(|a| a.scaled(factor)).collect(),
        }
    }

    pub fn map_values<W: Value>(&self, f: impl Fn(V) -> W + Copy) -> TypeProfile<W> {
        TypeProfile {
            domain: self.domain,
            agents: self
                .agents
                .iter()
                .map(|a| match a {
                    AgentType::Bid(b) => AgentType::Bid(b.map_values(f)),
                    AgentType::Assignment(v) => AgentType::Assignment(AssignmentValuation(v.0.iter().map(|&x| f(x)).collect())),
                })
                .collect(),
        }
    }
}

/// Reports of every agent except the one being priced (`θ_{-i}`).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct OthersProfile<V> {
    domain: Domain,
    agents: Vec<AgentType<V>>,
}

impl<V: Value> OthersProfile<V> {
    pub fn new(domain: Domain, agents: Vec<AgentType<V>>) -> Result<Self> {
        let expected = match domain {
            Domain::Assignment { agents: n } => {
                if agents.len() + 1 != n {
                    return Err(Error::InvalidProfile(format!("expected {} other agents, got {}", n - 1, agents.len())));
                }
                n
            }
            _ => agents.len() + 1,
        };
        for a in &agents {
            domain.check_agent(a, expected)?;
        }
        Ok(OthersProfile { domain, agents })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[AgentType<V>] {
        &self.agents
    }

    /// Largest value reported by any of these agents.
    pub fn max_value(&self) -> V {
        self.agents
            .iter()
            .map(|a| a.max_value())
            .fold(V::zero(), |m, v| if v > m { v } else { m })
    }

    pub fn scaled(&self, factor: V) -> Self {
        OthersProfile {
            domain: self.domain,
            agents: self.agents.iter().map(|a| a.scaled(factor)).collect(),
        }
    }

    /// Same agents in a new order; `order[k]` is the old index of the new `k`-th agent.
    pub fn permuted(&self, order: &[usize]) -> Self {
        OthersProfile {
            domain: self.domain,
            agents: order.iter().map(|&k| self.agents[k].clone()).collect(),
        }
    }
}

/// Per-agent partial outcomes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Allocation {
    outcomes: Vec<Outcome>,
}

impl Allocation {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        Allocation { outcomes }
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn get(&self, i: usize) -> Outcome {
        self.outcomes[i]
    }

    pub fn set(&mut self, i: usize, o: Outcome) {
        self.outcomes[i] = o;
    }

    /// Disjoint bundles (bundle domains) or a permutation (assignment).
    pub fn is_feasible(&self, domain: Domain) -> bool {
        match domain {
            Domain::SingleItem | Domain::Ca { .. } => {
                let full = Bundle::full(domain.items());
                let mut used = Bundle::EMPTY;
                for o in &self.outcomes {
                    let Outcome::Bundle(b) = *o else { return false };
                    if b.intersects(used) || !b.is_subset_of(full) {
                        return false;
                    }
                    used = used.union(b);
                }
                true
            }
            Domain::Assignment { agents } => {
                if self.outcomes.len() != agents {
                    return false;
                }
                let mut seen = vec![false; agents];
                for o in &self.outcomes {
                    match *o {
                        Outcome::Item(j) if j < agents && !seen[j] => seen[j] = true,
                        _ => return false,
                    }
                }
                true
            }
        }
    }

    /// `Σ_i v_i(θ_i, o_i)`.
    pub fn welfare<V: Value>(&self, profile: &TypeProfile<V>) -> V {
        self.outcomes
            .iter()
            .enumerate()
            .fold(V::zero(), |acc, (i, &o)| acc + profile.value(i, o))
    }
}

/// Rule mapping `(θ_{-i}, o_i)` to a price.
///
/// The own report of the priced agent is never passed in.
pub trait PriceFunction<S: Scalar>: Sync {
    /// Prices of `candidates`, in order.
    fn prices(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S>;

    fn price(&self, others: &OthersProfile<S>, o: Outcome) -> S {
        self.prices(others, &[o])[0]
    }
}

/// Adapts a closure into a [`PriceFunction`].
pub struct FnPrice<F>(pub F);

impl<S: Scalar, F> PriceFunction<S> for FnPrice<F>
where
    F: Fn(&OthersProfile<S>, Outcome) -> S + Sync,
{
    fn prices(&self, others: &OthersProfile<S>, candidates: &[Outcome]) -> Vec<S> {
        candidates.iter().map(|&o| (self.0)(others, o)).collect()
    }
}

/// Quasi-linear utility `v - p`.
#[inline]
pub fn utility<S: Scalar>(value: S, payment: S) -> S {
    value - payment
}

/// Index of the utility-maximising candidate; ties within tolerance go to
/// the earliest candidate.
pub fn argmax_utility<S: Scalar>(own: &AgentType<S>, prices: &[S], candidates: &[Outcome]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let utilities: Vec<S> = candidates
        .iter()
        .zip(prices)
        .map(|(&o, &p)| utility(own.value(o), p))
        .collect();
    let best = utilities.iter().copied().fold(S::neg_infinity(), S::max);
    Ok(utilities.iter().position(|&u| u >= best - S::tol()).unwrap_or(0))
}

/// Regret given precomputed candidate prices.
pub fn regret_from_prices<S: Scalar>(
    own: &AgentType<S>,
    prices: &[S],
    candidates: &[Outcome],
    chosen: Outcome,
) -> Result<S> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let pos = candidates
        .iter()
        .position(|&o| o == chosen)
        .ok_or_else(|| Error::OutcomeNotCandidate(chosen.to_string()))?;
    let chosen_u = utility(own.value(chosen), prices[pos]);
    let best = candidates
        .iter()
        .zip(prices)
        .map(|(&o, &p)| utility(own.value(o), p))
        .fold(chosen_u, S::max);
    Ok(best - chosen_u)
}

/// Ex post regret of truthful reporting when the mechanism assigns `chosen`
/// and any candidate could be reached by misreporting.
pub fn ex_post_regret<S: Scalar, P: PriceFunction<S> + ?Sized>(
    own: &AgentType<S>,
    others: &OthersProfile<S>,
    chosen: Outcome,
    prices: &P,
    candidates: &[Outcome],
) -> Result<S> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let p = prices.prices(others, candidates);
    regret_from_prices(own, &p, candidates, chosen)
}

/// `|min(u, 0)|` for the truthful outcome.
pub fn ir_violation<S: Scalar>(own: &AgentType<S>, chosen: Outcome, payment: S) -> S {
    let u = utility(own.value(chosen), payment);
    if u < S::zero() {
        -u
    } else {
        S::zero()
    }
}

/// Outcome agent 1 would pick facing prices `t(θ_{-1}, ·)`.
pub fn induced_classifier<S: Scalar, P: PriceFunction<S> + ?Sized>(
    prices: &P,
    own: &AgentType<S>,
    others: &OthersProfile<S>,
    candidates: &[Outcome],
) -> Result<Outcome> {
    let p = prices.prices(others, candidates);
    Ok(candidates[argmax_utility(own, &p, candidates)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bid(pairs: &[(&[usize], f64)]) -> MultiMindedBid<f64> {
        MultiMindedBid::new(pairs.iter().map(|(s, v)| (Bundle::from_items(s), *v)).collect()).unwrap()
    }

    #[test]
    fn bundle_decimal_index() {
        let b = Bundle::from_items(&[1, 3]);
        assert_eq!(b.index(), 1 + 4);
        assert_eq!(Bundle::full(4).index(), 15);
        assert_eq!(Bundle::EMPTY.index(), 0);
        assert_eq!(b.to_string(), "{1,3}");
        assert!(b.contains(3) && !b.contains(2));
    }

    #[test]
    fn value_of_examples() {
        let b = bid(&[(&[1], 12.0), (&[1, 2, 3, 4], 20.0)]);
        assert_eq!(b.value_of(Bundle::from_items(&[1, 3])), 12.0);
        assert_eq!(b.value_of(Bundle::full(4)), 20.0);
        assert_eq!(b.value_of(Bundle::EMPTY), 0.0);
        let c = bid(&[(&[1], 2.0)]);
        assert_eq!(c.value_of(Bundle::from_items(&[1, 2])), 2.0);
        assert_eq!(c.value_of(Bundle::from_items(&[2, 3])), 0.0);
    }

    #[test]
    fn bid_validation() {
        assert!(MultiMindedBid::new(vec![(Bundle::EMPTY, 1.0)]).is_err());
        assert!(MultiMindedBid::new(vec![(Bundle::from_items(&[1]), 1.0), (Bundle::from_items(&[1]), 2.0)]).is_err());
        assert!(MultiMindedBid::new(vec![(Bundle::from_items(&[1]), -1.0)]).is_err());
    }

    #[test]
    fn utility_and_ir() {
        assert_eq!(utility(5.0, 3.0), 2.0);
        assert_eq!(utility(0.0, 0.0), 0.0);
        assert!((utility(0.4, 0.7) + 0.3f64).abs() < 1e-12);
        let own = AgentType::Bid(bid(&[(&[1], 0.4)]));
        let win = Outcome::Bundle(Bundle::from_items(&[1]));
        assert_eq!(ir_violation(&own, win, 0.2), 0.0);
        assert!((ir_violation(&own, win, 0.7) - 0.3).abs() < 1e-12);
        assert_eq!(ir_violation(&own, Outcome::NULL, 0.0), 0.0);
    }

    fn single_item_others(v: f64) -> OthersProfile<f64> {
        TypeProfile::single_item(&[1.0, v]).unwrap().others(0)
    }

    #[test]
    fn regret_examples() {
        let cands = Domain::SingleItem.candidates();
        let win = cands[1];
        // Second price: truthful winner has no regret.
        let second = FnPrice(|o: &OthersProfile<f64>, out: Outcome| if out.is_null() { 0.0 } else { o.max_value() });
        let own = AgentType::Bid(bid(&[(&[1], 0.9)]));
        let others = single_item_others(0.4);
        assert_eq!(ex_post_regret(&own, &others, win, &second, &cands).unwrap(), 0.0);

        let own5 = AgentType::Bid(bid(&[(&[1], 5.0)]));
        let price7 = FnPrice(|_: &OthersProfile<f64>, o: Outcome| if o.is_null() { 0.0 } else { 7.0 });
        assert_eq!(ex_post_regret(&own5, &others, Outcome::NULL, &price7, &cands).unwrap(), 0.0);
        let price3 = FnPrice(|_: &OthersProfile<f64>, o: Outcome| if o.is_null() { 0.0 } else { 3.0 });
        assert_eq!(ex_post_regret(&own5, &others, Outcome::NULL, &price3, &cands).unwrap(), 2.0);

        assert!(matches!(ex_post_regret(&own5, &others, Outcome::NULL, &price3, &[]), Err(Error::EmptyCandidates)));
        assert!(ex_post_regret(&own5, &others, Outcome::Item(0), &price3, &cands).is_err());
    }

    #[test]
    fn induced_classifier_examples() {
        let cands = Domain::SingleItem.candidates();
        let own = AgentType::Bid(bid(&[(&[1], 5.0)]));
        let others = single_item_others(1.0);
        let price3 = FnPrice(|_: &OthersProfile<f64>, o: Outcome| if o.is_null() { 0.0 } else { 3.0 });
        assert_eq!(induced_classifier(&price3, &own, &others, &cands).unwrap(), cands[1]);

        let zero = AgentType::Bid(MultiMindedBid::empty());
        let free = FnPrice(|_: &OthersProfile<f64>, _: Outcome| 0.0);
        let all = Domain::Ca { items: 3 }.candidates();
        let others_ca = TypeProfile::ca(3, vec![MultiMindedBid::empty(), MultiMindedBid::empty()]).unwrap().others(0);
        assert_eq!(induced_classifier(&free, &zero, &others_ca, &all).unwrap(), Outcome::NULL);
    }

    #[test]
    fn feasibility() {
        let d = Domain::Ca { items: 3 };
        let ok = Allocation::new(vec![Outcome::Bundle(Bundle::from_items(&[1])), Outcome::Bundle(Bundle::from_items(&[2, 3]))]);
        assert!(ok.is_feasible(d));
        let bad = Allocation::new(vec![Outcome::Bundle(Bundle::from_items(&[1, 2])), Outcome::Bundle(Bundle::from_items(&[2]))]);
        assert!(!bad.is_feasible(d));
        let a = Domain::Assignment { agents: 3 };
        assert!(Allocation::new(vec![Outcome::Item(2), Outcome::Item(0), Outcome::Item(1)]).is_feasible(a));
        assert!(!Allocation::new(vec![Outcome::Item(2), Outcome::Item(2), Outcome::Item(1)]).is_feasible(a));
    }

    #[test]
    fn candidates_per_domain() {
        assert_eq!(Domain::Ca { items: 5 }.candidates().len(), 32);
        assert_eq!(Domain::Assignment { agents: 4 }.candidates().len(), 4);
        assert_eq!(Domain::SingleItem.candidates().len(), 2);
        assert_eq!(Domain::Ca { items: 5 }.candidates()[0], Outcome::NULL);
    }

    #[test]
    fn profile_validation() {
        assert!(TypeProfile::<f64>::assignment(vec![vec![0.1, 0.2], vec![0.3]]).is_err());
        let mixed = TypeProfile::new(
            Domain::Ca { items: 2 },
            vec![AgentType::Bid(MultiMindedBid::<f64>::empty()), AgentType::Assignment(AssignmentValuation(vec![0.1, 0.2]))],
        );
        assert!(mixed.is_err());
        let outside = TypeProfile::ca(2, vec![MultiMindedBid::single(Bundle::from_items(&[3]), 1.0).unwrap(), MultiMindedBid::empty()]);
        assert!(outside.is_err());
    }
}
