//! Outcome rules and the restricted-welfare helpers VCG prices need.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Allocation, Bundle, Domain, MultiMindedBid, OthersProfile, Outcome, TypeProfile};
use crate::scalar::{Scalar, Value};

/// Largest `n` for which the egalitarian rule enumerates permutations.
pub const MAX_EGALITARIAN_AGENTS: usize = 9;

/// Outcome rule `g` producing the labels.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeRule {
    /// Highest value wins the single item.
    SingleItemOptimal,
    /// Greedy by `v / sqrt(|S|)`.
    GreedyCa,
    /// Exact winner determination.
    OptimalCa,
    /// Lexicographic maximin assignment.
    Egalitarian,
}

impl OutcomeRule {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeRule::SingleItemOptimal => "optimal",
            OutcomeRule::GreedyCa => "greedy",
            OutcomeRule::OptimalCa => "optimal",
            OutcomeRule::Egalitarian => "egalitarian",
        }
    }

    pub fn supports(self, domain: Domain) -> bool {
        matches!(
            (self, domain),
            (OutcomeRule::SingleItemOptimal, Domain::SingleItem)
                | (OutcomeRule::GreedyCa | OutcomeRule::OptimalCa, Domain::SingleItem | Domain::Ca { .. })
                | (OutcomeRule::Egalitarian, Domain::Assignment { .. })
        )
    }

    pub fn allocate<S: Scalar>(self, profile: &TypeProfile<S>) -> Result<Allocation> {
        let domain = profile.domain();
        if !self.supports(domain) {
            return Err(Error::DomainMismatch(format!("rule {:?} on domain {}", self, domain.name())));
        }
        match self {
            OutcomeRule::SingleItemOptimal => Ok(single_item_optimal(profile)),
            OutcomeRule::GreedyCa => Ok(greedy_ca(profile)),
            OutcomeRule::OptimalCa => {
                let full = Bundle::full(domain.items());
                Ok(optimal_ca(profile, full, None).0)
            }
            OutcomeRule::Egalitarian => egalitarian_assignment(profile),
        }
    }
}

/// All partial outcomes of agent 1; `θ_{-1}` does not restrict them.
pub fn candidate_outcomes<V: Value>(domain: Domain, _others: &OthersProfile<V>) -> Vec<Outcome> {
    domain.candidates()
}

/// `{∅}` plus every desired bundle of every agent, ascending by index.
pub fn item_mon_candidates<V: Value>(profile: &TypeProfile<V>) -> Vec<Outcome> {
    let mut bundles: Vec<Bundle> = vec![Bundle::EMPTY];
    for a in profile.agents() {
        if let Some(b) = a.as_bid() {
            bundles.extend(b.bids().iter().map(|&(s, _)| s));
        }
    }
    bundles.sort();
    bundles.dedup();
    bundles.into_iter().map(Outcome::Bundle).collect()
}

/// Highest value wins; ties go to the lowest agent index.
pub fn single_item_optimal<V: Value>(profile: &TypeProfile<V>) -> Allocation {
    let win = Outcome::Bundle(Bundle::from_bits(1));
    let mut winner = 0;
    let mut best = profile.value(0, win);
    for i in 1..profile.n() {
        let v = profile.value(i, win);
        if v > best {
            best = v;
            winner = i;
        }
    }
    let mut out = vec![Outcome::NULL; profile.n()];
    out[winner] = win;
    Allocation::new(out)
}

/// Greedy winner determination for multi-minded bids.
///
/// Bids are visited by score `v / sqrt(|S|)` descending, then value
/// descending, agent ascending, bundle index ascending. A bid wins when its
/// agent is unserved and its items are still free.
pub fn greedy_ca<S: Scalar>(profile: &TypeProfile<S>) -> Allocation {
    let mut entries: Vec<(S, S, usize, Bundle)> = Vec::new();
    for (i, a) in profile.agents().iter().enumerate() {
        if let Some(b) = a.as_bid() {
            for &(s, v) in b.bids() {
                if v > S::zero() {
                    let score = v / S::lit(s.len() as f64).sqrt();
                    entries.push((score, v, i, s));
                }
            }
        }
    }
    entries.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(Ordering::Equal)
            .then(y.1.partial_cmp(&x.1).unwrap_or(Ordering::Equal))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut out = vec![Outcome::NULL; profile.n()];
    let mut served = vec![false; profile.n()];
    let mut used = Bundle::EMPTY;
    for (_, _, i, s) in entries {
        if !served[i] && !s.intersects(used) {
            served[i] = true;
            used = used.union(s);
            out[i] = Outcome::Bundle(s);
        }
    }
    Allocation::new(out)
}

/// Exact welfare maximisation over `bids` using only `allowed` items.
///
/// Returns, per agent, the index into its bid list of the winning bid.
/// Depth-first over agents in descending order of their best bid; each agent
/// tries its bids by value descending and "nothing" last. The bound adds
/// every remaining agent's best bid that still fits the free items, which
/// never underestimates the attainable welfare.
pub fn max_welfare_bids<V: Value>(bids: &[&MultiMindedBid<V>], allowed: Bundle) -> (Vec<Option<usize>>, V) {
    let n = bids.len();
    let mut order: Vec<usize> = (0..n).collect();
    let best_bid: Vec<V> = bids.iter().map(|b| b.max_value()).collect();
    order.sort_by(|&a, &b| best_bid[b].partial_cmp(&best_bid[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let sorted_bids: Vec<Vec<(usize, Bundle, V)>> = order
        .iter()
        .map(|&i| {
            let mut v: Vec<(usize, Bundle, V)> = bids[i]
                .bids()
                .iter()
                .enumerate()
                .filter(|(_, (s, v))| s.is_subset_of(allowed) && *v > V::zero())
                .map(|(j, &(s, v))| (j, s, v))
                .collect();
            v.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap_or(Ordering::Equal).then(x.0.cmp(&y.0)));
            v
        })
        .collect();

    struct Search<'a, V> {
        bids: &'a [Vec<(usize, Bundle, V)>],
        current: Vec<Option<usize>>,
        best: Vec<Option<usize>>,
        best_value: V,
    }

    impl<V: Value> Search<'_, V> {
        fn bound(&self, depth: usize, free: Bundle) -> V {
            let mut total = V::zero();
            for agent in &self.bids[depth..] {
                if let Some(&(_, _, v)) = agent.iter().find(|(_, s, _)| s.is_subset_of(free)) {
                    total = total + v;
                }
            }
            total
        }

        fn run(&mut self, depth: usize, free: Bundle, value: V) {
            if depth == self.bids.len() {
                if value > self.best_value {
                    self.best_value = value;
                    self.best = self.current.clone();
                }
                return;
            }
            if !(value + self.bound(depth, free) > self.best_value) {
                return;
            }
            for k in 0..self.bids[depth].len() {
                let (j, s, v) = self.bids[depth][k];
                if s.is_subset_of(free) {
                    self.current[depth] = Some(j);
                    self.run(depth + 1, free.minus(s), value + v);
                }
            }
            self.current[depth] = None;
            self.run(depth + 1, free, value);
        }
    }

    let mut search = Search {
        bids: &sorted_bids,
        current: vec![None; n],
        best: vec![None; n],
        best_value: V::zero(),
    };
    search.run(0, allowed, V::zero());
    let mut chosen = vec![None; n];
    for (pos, &i) in order.iter().enumerate() {
        chosen[i] = search.best[pos];
    }
    (chosen, search.best_value)
}

/// Welfare-maximising allocation over `allowed` items, optionally leaving
/// `excluded` out. Winners receive exactly their desired bundle.
pub fn optimal_ca<V: Value>(profile: &TypeProfile<V>, allowed: Bundle, excluded: Option<usize>) -> (Allocation, V) {
    let empty = MultiMindedBid::empty();
    let bids: Vec<&MultiMindedBid<V>> = profile
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| if Some(i) == excluded { &empty } else { a.as_bid().unwrap_or(&empty) })
        .collect();
    let (chosen, welfare) = max_welfare_bids(&bids, allowed);
    let out = chosen
        .iter()
        .zip(&bids)
        .map(|(c, b)| c.map_or(Outcome::NULL, |j| Outcome::Bundle(b.bids()[j].0)))
        .collect();
    (Allocation::new(out), welfare)
}

/// Optimal welfare of `θ_{-1}` restricted to `allowed` items.
pub fn others_welfare<V: Value>(others: &OthersProfile<V>, allowed: Bundle) -> V {
    let empty = MultiMindedBid::empty();
    let bids: Vec<&MultiMindedBid<V>> = others.agents().iter().map(|a| a.as_bid().unwrap_or(&empty)).collect();
    max_welfare_bids(&bids, allowed).1
}

/// Maximum-weight injection of agents into `items` by dynamic programming
/// over subsets of used items. `values[a][j]` is agent `a`'s value for item `j`.
pub fn max_welfare_injection<V: Value>(values: &[&[V]], items: &[usize]) -> V {
    let m = items.len();
    let agents = values.len();
    assert!(agents <= m, "more agents than items");
    assert!(m <= 20, "too many items for subset DP");
    let mut dp: Vec<Option<V>> = vec![None; 1 << m];
    dp[0] = Some(V::zero());
    let mut best = if agents == 0 { V::zero() } else { V::zero() - V::one() };
    let mut found = agents == 0;
    for mask in 0..(1usize << m) {
        let Some(cur) = dp[mask] else { continue };
        let a = mask.count_ones() as usize;
        if a == agents {
            if !found || cur > best {
                best = cur;
                found = true;
            }
            continue;
        }
        for (pos, &item) in items.iter().enumerate() {
            if mask & (1 << pos) == 0 {
                let next = mask | (1 << pos);
                let cand = cur + values[a][item];
                if dp[next].map_or(true, |d| cand > d) {
                    dp[next] = Some(cand);
                }
            }
        }
    }
    best
}

/// Lexicographic-maximin injection of agents into `items`.
///
/// Injections are enumerated in lexicographic order of item positions; the
/// first one with a lexicographically maximal ascending-sorted value vector
/// is returned as `result[a] = item`.
pub fn egalitarian_injection<V: Value>(values: &[&[V]], items: &[usize]) -> Result<Vec<usize>> {
    let agents = values.len();
    if agents > items.len() {
        return Err(Error::InvalidProfile("more agents than items".into()));
    }
    if items.len() > MAX_EGALITARIAN_AGENTS {
        return Err(Error::TooLarge(format!(
            "egalitarian search over {} items exceeds {}",
            items.len(),
            MAX_EGALITARIAN_AGENTS
        )));
    }

    struct Search<'a, V> {
        values: &'a [&'a [V]],
        items: &'a [usize],
        used: Vec<bool>,
        current: Vec<usize>,
        best: Option<(Vec<V>, Vec<usize>)>,
    }

    impl<V: Value> Search<'_, V> {
        fn run(&mut self, a: usize) {
            if a == self.values.len() {
                let mut sorted: Vec<V> = self.current.iter().enumerate().map(|(i, &j)| self.values[i][j]).collect();
                sorted.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
                let better = match &self.best {
                    None => true,
                    Some((b, _)) => lex_greater(&sorted, b),
                };
                if better {
                    self.best = Some((sorted, self.current.clone()));
                }
                return;
            }
            for pos in 0..self.items.len() {
                if !self.used[pos] {
                    self.used[pos] = true;
                    self.current.push(self.items[pos]);
                    self.run(a + 1);
                    self.current.pop();
                    self.used[pos] = false;
                }
            }
        }
    }

    let mut search = Search {
        values,
        items,
        used: vec![false; items.len()],
        current: Vec::with_capacity(agents),
        best: None,
    };
    search.run(0);
    Ok(search.best.map(|(_, a)| a).unwrap_or_default())
}

fn lex_greater<V: Value>(a: &[V], b: &[V]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    false
}

/// Lexicographic egalitarian assignment of `n` items to `n` agents.
pub fn egalitarian_assignment<V: Value>(profile: &TypeProfile<V>) -> Result<Allocation> {
    let rows = assignment_rows(profile.agents().iter().map(|a| a.as_assignment().map(|v| v.values())))?;
    let n = profile.n();
    let items: Vec<usize> = (0..n).collect();
    let perm = egalitarian_injection(&rows, &items)?;
    Ok(Allocation::new(perm.into_iter().map(Outcome::Item).collect()))
}

pub(crate) fn assignment_rows<'a, V: 'a>(rows: impl Iterator<Item = Option<&'a [V]>>) -> Result<Vec<&'a [V]>> {
    rows.map(|r| r.ok_or_else(|| Error::DomainMismatch("expected assignment valuations".into())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::AgentType;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bid(pairs: &[(&[usize], f64)]) -> MultiMindedBid<f64> {
        MultiMindedBid::new(pairs.iter().map(|(s, v)| (Bundle::from_items(s), *v)).collect()).unwrap()
    }

    fn random_ca(rng: &mut ChaCha8Rng, n: usize, r: usize, b: usize) -> TypeProfile<f64> {
        let bids = (0..n)
            .map(|_| {
                let mut pairs: Vec<(Bundle, f64)> = Vec::new();
                for _ in 0..b {
                    let s = Bundle::from_bits(rng.gen_range(1..(1u32 << r)));
                    if pairs.iter().all(|(t, _)| *t != s) {
                        pairs.push((s, rng.gen_range(0.01..1.0)));
                    }
                }
                MultiMindedBid::new(pairs).unwrap()
            })
            .collect();
        TypeProfile::ca(r, bids).unwrap()
    }

    #[test]
    fn single_item_examples() {
        let win = Outcome::Bundle(Bundle::from_bits(1));
        let a = single_item_optimal(&TypeProfile::single_item(&[1.0, 3.0, 5.0]).unwrap());
        assert_eq!(a.get(2), win);
        assert_eq!(a.get(0), Outcome::NULL);
        let b = single_item_optimal(&TypeProfile::single_item(&[5.0, 4.0, 3.0]).unwrap());
        assert_eq!(b.get(0), win);
        let c = single_item_optimal(&TypeProfile::single_item(&[2.0, 2.0]).unwrap());
        assert_eq!(c.get(0), win);
        assert_eq!(c.get(1), Outcome::NULL);
    }

    #[test]
    fn appendix_b_greedy_fixture() {
        let theta = TypeProfile::ca(4, vec![bid(&[(&[1], 12.0), (&[1, 2, 3, 4], 20.0)]), MultiMindedBid::empty()]).unwrap();
        let theta_p = TypeProfile::ca(4, vec![bid(&[(&[1], 5.0), (&[1, 2, 3, 4], 12.0)]), MultiMindedBid::empty()]).unwrap();
        let o = greedy_ca(&theta).get(0).bundle().unwrap();
        let o_p = greedy_ca(&theta_p).get(0).bundle().unwrap();
        assert_eq!(o, Bundle::from_items(&[1]));
        assert_eq!(o_p, Bundle::full(4));
        let full = Bundle::full(4);
        let one = Bundle::from_items(&[1]);
        let b = theta.agent(0).as_bid().unwrap();
        let bp = theta_p.agent(0).as_bid().unwrap();
        // Weak monotonicity would require the reverse inequality.
        assert!(bp.value_of(full) - bp.value_of(one) < b.value_of(full) - b.value_of(one));
    }

    #[test]
    fn greedy_disjoint_singletons() {
        let p = TypeProfile::ca(3, vec![bid(&[(&[1], 0.3)]), bid(&[(&[2], 0.4)])]).unwrap();
        let a = greedy_ca(&p);
        assert_eq!(a.get(0), Outcome::Bundle(Bundle::from_items(&[1])));
        assert_eq!(a.get(1), Outcome::Bundle(Bundle::from_items(&[2])));
    }

    #[test]
    fn optimal_ca_examples() {
        let p = TypeProfile::ca(2, vec![bid(&[(&[1], 0.9)]), bid(&[(&[1], 0.5)])]).unwrap();
        let (a, w) = optimal_ca(&p, Bundle::full(2), None);
        assert_eq!(w, 0.9);
        assert_eq!(a.get(0), Outcome::Bundle(Bundle::from_items(&[1])));
        let (_, w2) = optimal_ca(&p, Bundle::full(2), Some(0));
        assert_eq!(w2, 0.5);
        let (_, w3) = optimal_ca(&p, Bundle::from_items(&[2]), None);
        assert_eq!(w3, 0.0);
        let one = TypeProfile::ca(3, vec![bid(&[(&[1], 0.2), (&[2, 3], 0.6), (&[1, 2, 3], 0.7)]), MultiMindedBid::empty()]).unwrap();
        let (a, w) = optimal_ca(&one, Bundle::from_items(&[1, 2, 3]), None);
        assert_eq!(w, 0.7);
        assert_eq!(a.get(0), Outcome::Bundle(Bundle::full(3)));
    }

    /// Tries every combination of one bid or nothing per agent.
    fn brute_force_welfare(p: &TypeProfile<f64>, allowed: Bundle) -> f64 {
        let bids: Vec<&MultiMindedBid<f64>> = p.agents().iter().map(|a| a.as_bid().unwrap()).collect();
        let mut best = 0.0f64;
        let radix: Vec<usize> = bids.iter().map(|b| b.len() + 1).collect();
        let total: usize = radix.iter().product();
        for mut code in 0..total {
            let mut used = Bundle::EMPTY;
            let mut w = 0.0;
            let mut ok = true;
            for (b, &r) in bids.iter().zip(&radix) {
                let pick = code % r;
                code /= r;
                if pick > 0 {
                    let (s, v) = b.bids()[pick - 1];
                    if s.intersects(used) || !s.is_subset_of(allowed) {
                        ok = false;
                        break;
                    }
                    used = used.union(s);
                    w += v;
                }
            }
            if ok {
                best = best.max(w);
            }
        }
        best
    }

    #[test]
    fn optimal_ca_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let p = random_ca(&mut rng, 3, 4, 2);
            let allowed = Bundle::from_bits(rng.gen_range(0..16));
            let (a, w) = optimal_ca(&p, allowed, None);
            assert!((w - brute_force_welfare(&p, allowed)).abs() < 1e-12);
            assert!(a.is_feasible(p.domain()));
            assert!((a.welfare(&p) - w).abs() < 1e-12);
            let g = greedy_ca(&p);
            assert!(g.is_feasible(p.domain()));
            let (_, full) = optimal_ca(&p, Bundle::full(4), None);
            assert!(full + 1e-12 >= g.welfare(&p));
        }
    }

    #[test]
    fn egalitarian_examples() {
        let p = TypeProfile::assignment(vec![vec![0.9, 0.1], vec![0.8, 0.2]]).unwrap();
        let a = egalitarian_assignment(&p).unwrap();
        assert_eq!(a.outcomes(), &[Outcome::Item(0), Outcome::Item(1)]);
        let same = TypeProfile::assignment(vec![vec![0.5, 0.5, 0.5]; 3]).unwrap();
        let a = egalitarian_assignment(&same).unwrap();
        assert_eq!(a.outcomes(), &[Outcome::Item(0), Outcome::Item(1), Outcome::Item(2)]);
        let big = TypeProfile::assignment(vec![vec![0.5; 10]; 10]).unwrap();
        assert!(matches!(egalitarian_assignment(&big), Err(Error::TooLarge(_))));
    }

    /// Maximise the minimum, fix an agent attaining it on an item achieving
    /// the optimum for the rest, and recurse.
    fn recursive_maximin(values: &[Vec<f64>], agents: Vec<usize>, items: Vec<usize>) -> Vec<f64> {
        if agents.is_empty() {
            return Vec::new();
        }
        let mut best: Option<Vec<f64>> = None;
        for (ai, &a) in agents.iter().enumerate() {
            for (ji, &j) in items.iter().enumerate() {
                let mut rest_a = agents.clone();
                rest_a.remove(ai);
                let mut rest_i = items.clone();
                rest_i.remove(ji);
                let rest = recursive_maximin(values, rest_a, rest_i);
                if rest.first().map_or(true, |&m| values[a][j] <= m) {
                    let mut v = vec![values[a][j]];
                    v.extend(rest);
                    if best.as_ref().map_or(true, |b| lex_greater(&v, b)) {
                        best = Some(v);
                    }
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn egalitarian_matches_recursive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
            let p = TypeProfile::assignment(rows.clone()).unwrap();
            let a = egalitarian_assignment(&p).unwrap();
            assert!(a.is_feasible(p.domain()));
            let mut got: Vec<f64> = (0..4).map(|i| rows[i][a.get(i).item().unwrap()]).collect();
            got.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let want = recursive_maximin(&rows, (0..4).collect(), (0..4).collect());
            assert_eq!(got, want);
        }
    }

    #[test]
    fn egalitarian_relabel_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
            let perm = [2usize, 0, 3, 1];
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&k| rows[k].clone()).collect();
            let a = egalitarian_assignment(&TypeProfile::assignment(rows).unwrap()).unwrap();
            let b = egalitarian_assignment(&TypeProfile::assignment(permuted).unwrap()).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                assert_eq!(b.get(new), a.get(old));
            }
        }
    }

    #[test]
    fn injection_dp_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let items = [0usize, 1, 3];
            let mut best = f64::MIN;
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        if a != b && b != c && a != c {
                            best = best.max(rows[0][items[a]] + rows[1][items[b]] + rows[2][items[c]]);
                        }
                    }
                }
            }
            assert!((max_welfare_injection(&refs, &items) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn candidates_and_item_mon() {
        let p = TypeProfile::ca(5, vec![bid(&[(&[1], 0.2), (&[2, 3], 0.5)]), bid(&[(&[2, 3], 0.4), (&[5], 0.1)])]).unwrap();
        assert_eq!(candidate_outcomes(p.domain(), &p.others(0)).len(), 32);
        let c = item_mon_candidates(&p);
        assert_eq!(c.len(), 4);
        assert_eq!(c[0], Outcome::NULL);
        let a = TypeProfile::assignment(vec![vec![0.1; 4]; 4]).unwrap();
        assert_eq!(candidate_outcomes(a.domain(), &a.others(0)).len(), 4);
        let s = TypeProfile::single_item(&[0.1, 0.2]).unwrap();
        assert_eq!(candidate_outcomes(s.domain(), &s.others(0)).len(), 2);
        assert!(matches!(
            OutcomeRule::Egalitarian.allocate(&p),
            Err(Error::DomainMismatch(_))
        ));
        let _ = AgentType::<f64>::Bid(MultiMindedBid::empty());
    }
}
