//! Independent oracles and invariant checks shared by the integration tests.
#![allow(dead_code)]

use mechlearn::features::{joint_kernel, JointPoint, KernelConfig};
use mechlearn::gendata::Dataset;
use mechlearn::trainer::training_views;
use mechlearn::mechanism::{regret_from_prices, Bundle, MultiMindedBid, OthersProfile, Outcome, PriceFunction, TypeProfile};
use mechlearn::trainer::TrainedModel;
use mechlearn::{AgentType, Domain};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `x[B] = max { v : (S, v) bid, S ⊆ B }` for every bundle `B`.
pub fn explicit_valuation(bid: &MultiMindedBid<f64>, r: usize) -> Vec<f64> {
    (0..1u32 << r)
        .map(|b| {
            let bundle = Bundle::from_bits(b);
            bid.bids().iter().filter(|(s, _)| s.is_subset_of(bundle)).map(|&(_, v)| v).fold(0.0, f64::max)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacked `χ2` vector: each agent's valuation with bundles meeting `o` zeroed.
pub fn explicit_chi2(others: &OthersProfile<f64>, o: Outcome) -> Vec<f64> {
    let r = others.domain().items();
    let ob = o.bundle().unwrap();
    let mut out = Vec::new();
    for a in others.agents() {
        let x = explicit_valuation(a.as_bid().unwrap(), r);
        out.extend(x.iter().enumerate().map(|(b, &v)| if Bundle::from_bits(b as u32).intersects(ob) { 0.0 } else { v }));
    }
    out
}

/// Up to `b` distinct nonempty bundles over `r` items with values in `(0, 1]`.
pub fn random_bid(r: usize, b: usize, rng: &mut ChaCha8Rng) -> MultiMindedBid<f64> {
    let mut bids: Vec<(Bundle, f64)> = Vec::new();
    while bids.len() < b {
        let s = Bundle::from_bits(rng.gen_range(1..1u32 << r));
        if bids.iter().all(|(t, _)| *t != s) {
            bids.push((s, 1.0 - rng.gen::<f64>()));
        }
    }
    MultiMindedBid::new(bids).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Largest `rgt(θ^k) - ξ^k / w1` over the training set, using the model's
/// raw prices on the preprocessed training views.
pub fn theorem_gap(model: &TrainedModel<f64>, train: &Dataset<f64>) -> f64 {
    assert_eq!(model.train_size, train.len());
    let full = model.domain.candidates();
    let views = training_views(train).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for (k, view) in views.iter().enumerate() {
        let others = view.others(0);
        let prices = model.raw_prices(&others, &full).unwrap();
        let rgt = regret_from_prices(view.agent(0), &prices, &full, train.examples[k].label).unwrap();
        worst = worst.max(rgt - model.diagnostics.slacks[k] / model.w1);
    }
    worst
}

/// Replaces agent 0's report with a fresh draw from the same domain.
pub fn perturb_own(profile: &TypeProfile<f64>, rng: &mut ChaCha8Rng) -> TypeProfile<f64> {
    let own = match profile.agent(0) {
        AgentType::Bid(_) => match profile.domain() {
            Domain::SingleItem => AgentType::Bid(MultiMindedBid::single(Bundle::full(1), rng.gen()).unwrap()),
            d => AgentType::Bid(random_bid(d.items(), 2, rng)),
        },
        AgentType::Assignment(a) => {
            AgentType::Assignment(mechlearn::AssignmentValuation(a.values().iter().map(|_| rng.gen()).collect()))
        }
    };
    TypeProfile::from_parts(own, profile.others(0)).unwrap()
}

/// Prices of `others(0)` are identical for both profiles, bit for bit.
pub fn agent_independent<P: PriceFunction<f64> + ?Sized>(p: &P, a: &TypeProfile<f64>, b: &TypeProfile<f64>) -> bool {
    let full = a.domain().candidates();
    let pa = p.prices(&a.others(0), &full);
    let pb = p.prices(&b.others(0), &full);
    pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Smallest eigenvalue of the joint-kernel Gram matrix over `points`,
/// relative to its largest diagonal entry.
pub fn gram_min_eigen(kernel: &KernelConfig, points: &[JointPoint<'_, f64>]) -> f64 {
    let n = points.len();
    let g = DMatrix::from_fn(n, n, |i, j| joint_kernel(kernel, &points[i], &points[j]).unwrap());
    let scale = (0..n).map(|i| g[(i, i)].abs()).fold(1.0, f64::max);
    let sym = (&g + g.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min) / scale
}

/// Non-decreasing up to a relative slack.
pub fn non_decreasing(xs: &[f64], slack: f64) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - slack * w[0].abs().max(1.0))
}

pub fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}
