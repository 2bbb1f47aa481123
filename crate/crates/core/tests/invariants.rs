//! Property suites: agent independence, payment non-negativity, kernel
//! positive semidefiniteness, dual feasibility and monotone objectives.

mod common;

use std::sync::OnceLock;

use common::*;
use mechlearn::features::{AttributeMapKind, JointPoint, KernelConfig};
use mechlearn::gendata::{sample_split, AssignmentDistributionConfig, CaDistributionConfig, Dataset, Distribution, Preprocess, Split};
use mechlearn::mechanism::{regret_from_prices, ir_violation, Allocation, OthersProfile, Outcome, PriceFunction, TypeProfile};
use mechlearn::outcomes::OutcomeRule;
use mechlearn::payments::{apply_offset, deallocate_fix, BaselineKind, BaselinePrice, LearnedPriceRule};
use mechlearn::trainer::{train, DualSolver, TrainedModel, TrainingConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ca_dist(n: usize, r: usize, zeta: f64) -> Distribution {
    Distribution::Ca(CaDistributionConfig { n, r, b: 2, decay_prob: 0.75, beta: 0.5, zeta })
}

fn draw(dist: &Distribution, seed: u64) -> TypeProfile<f64> {
    dist.sample(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn ca_model() -> &'static (TrainedModel<f64>, Dataset<f64>) {
    static MODEL: OnceLock<(TrainedModel<f64>, Dataset<f64>)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let dist = ca_dist(3, 3, 1.0);
        let data = sample_split(&dist, OutcomeRule::GreedyCa, Preprocess::default_for(dist.domain()), 40, 11, Split::Train).unwrap();
        let cfg = TrainingConfig::new(1e3, KernelConfig::Rbf { gamma: 0.5 }, AttributeMapKind::Chi2);
        (train(&data, &cfg).unwrap(), data)
    })
}

fn assignment_model() -> &'static TrainedModel<f64> {
    static MODEL: OnceLock<TrainedModel<f64>> = OnceLock::new();
    MODEL.get_or_init(|| {
        let dist = Distribution::Assignment(AssignmentDistributionConfig { n: 3 });
        let data = sample_split(&dist, OutcomeRule::Egalitarian, Preprocess::NONE, 40, 5, Split::Train).unwrap();
        train(&data, &TrainingConfig::new(100.0, KernelConfig::Rbf { gamma: 0.5 }, AttributeMapKind::Chi3)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn learned_prices_ignore_own_report(seed in any::<u64>()) {
        let (model, _) = ca_model();
        prop_assume!(model.is_admissible());
        let dist = ca_dist(3, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = draw(&dist, seed);
        let b = perturb_own(&a, &mut rng);
        let rule = LearnedPriceRule::new(model, 0.0).unwrap();
        prop_assert!(agent_independent(&rule, &a, &b));
        // Price recovered from the full discriminant, which does see θ_1.
        let m = model.preprocess.apply(&a.others(0)).1;
        for o in a.domain().candidates() {
            let t = mechlearn::payments::learned_price(model, &a.others(0), o).unwrap();
            for p in [&a, &b] {
                let from_f = p.value(0, o) - model.discriminant(p, o) / (model.w1 * m);
                prop_assert!((from_f - t).abs() <= 1e-9 * t.abs().max(1.0), "{} vs {}", from_f, t);
            }
        }
    }

    #[test]
    fn baselines_ignore_own_report(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ca = draw(&ca_dist(3, 4, 1.5), seed);
        let vcg = BaselinePrice::new(BaselineKind::VcgCa, ca.domain()).unwrap();
        prop_assert!(agent_independent(&vcg, &ca, &perturb_own(&ca, &mut rng)));
        let asg = draw(&Distribution::Assignment(AssignmentDistributionConfig { n: 4 }), seed);
        for kind in [BaselineKind::VcgAssignment, BaselineKind::TotVcg, BaselineKind::EgVcg] {
            let p = BaselinePrice::new(kind, asg.domain()).unwrap();
            prop_assert!(agent_independent(&p, &asg, &perturb_own(&asg, &mut rng)));
        }
    }

    #[test]
    fn normalized_payments_are_non_negative(seed in any::<u64>(), offset in 0.0f64..0.3) {
        let (model, _) = ca_model();
        prop_assume!(model.is_admissible());
        let ca = draw(&ca_dist(3, 3, 1.0), seed);
        let rule = LearnedPriceRule::new(model, offset).unwrap();
        let p = rule.full_prices(&ca.others(0));
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(p[0], 0.0);
        let asg_model = assignment_model();
        prop_assume!(asg_model.is_admissible());
        let asg = draw(&Distribution::Assignment(AssignmentDistributionConfig { n: 3 }), seed);
        let p = LearnedPriceRule::new(asg_model, offset).unwrap().full_prices(&asg.others(0));
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(p.iter().any(|&x| x == 0.0));
        for kind in [BaselineKind::VcgAssignment, BaselineKind::TotVcg, BaselineKind::EgVcg] {
            let q = BaselinePrice::new(kind, asg.domain()).unwrap().prices(&asg.others(0), &asg.domain().candidates());
            prop_assert!(q.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn offsets_never_raise_prices(prices in prop::collection::vec(0.0f64..2.0, 1..10), lo in 0.0f64..0.5, extra in 0.0f64..0.5, b in 0usize..10) {
        let b = b % prices.len();
        let small = apply_offset(&prices, lo, b);
        let large = apply_offset(&prices, lo + extra, b);
        prop_assert!(small.iter().zip(&large).all(|(s, l)| l <= s && *l >= 0.0));
        prop_assert_eq!(large[b], prices[b]);
    }

    #[test]
    fn regret_and_ir_are_non_negative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = draw(&ca_dist(2, 3, 1.0), seed);
        let full = p.domain().candidates();
        let prices: Vec<f64> = full.iter().map(|_| rng.gen::<f64>()).collect();
        for (j, &o) in full.iter().enumerate() {
            prop_assert!(regret_from_prices(p.agent(0), &prices, &full, o).unwrap() >= 0.0);
            prop_assert!(ir_violation(p.agent(0), o, prices[j]) >= 0.0);
        }
    }

    #[test]
    fn deallocation_clears_ir_violations(seed in any::<u64>(), level in 0.0f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = draw(&ca_dist(3, 4, 1.0), seed);
        let alloc: Allocation = OutcomeRule::GreedyCa.allocate(&p).unwrap();
        let pay: Vec<f64> = (0..p.n()).map(|_| level * rng.gen::<f64>()).collect();
        let (after, pay2, ratio) = deallocate_fix(&p, &alloc, &pay).unwrap();
        prop_assert!((0.0..=1.0).contains(&ratio));
        prop_assert!(after.is_feasible(p.domain()));
        for i in 0..p.n() {
            prop_assert!(ir_violation(p.agent(i), after.get(i), pay2[i]) <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn joint_kernel_gram_is_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = ca_dist(3, 3, 1.0);
        let others: Vec<OthersProfile<f64>> = (0..6).map(|k| draw(&dist, seed ^ k).others(0)).collect();
        let full = dist.domain().candidates();
        let kernels = [KernelConfig::Linear, KernelConfig::Polynomial { degree: 2 }, KernelConfig::Rbf { gamma: 0.7 }];
        for map in [AttributeMapKind::Chi1, AttributeMapKind::Chi2] {
            let points: Vec<JointPoint<'_, f64>> = (0..18)
                .map(|_| JointPoint {
                    value: rng.gen(),
                    map,
                    others: &others[rng.gen_range(0..others.len())],
                    outcome: full[rng.gen_range(0..full.len())],
                })
                .collect();
            for k in &kernels {
                let e = gram_min_eigen(k, &points);
                prop_assert!(e >= -1e-8, "{:?} {:?}: {}", map, k, e);
            }
        }
        let asg = Distribution::Assignment(AssignmentDistributionConfig { n: 4 });
        let aothers: Vec<OthersProfile<f64>> = (0..6).map(|k| draw(&asg, seed ^ k).others(0)).collect();
        let points: Vec<JointPoint<'_, f64>> = (0..16)
            .map(|_| JointPoint {
                value: rng.gen(),
                map: AttributeMapKind::Chi3,
                others: &aothers[rng.gen_range(0..aothers.len())],
                outcome: Outcome::Item(rng.gen_range(0..4)),
            })
            .collect();
        for k in &kernels {
            prop_assert!(gram_min_eigen(k, &points) >= -1e-8);
        }
    }

    #[test]
    fn dual_solver_stays_feasible_and_monotone(seed in any::<u64>(), groups in 1usize..5, bound in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 4;
        let n = 12;
        let vecs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut solver = DualSolver::new(groups, bound, 1e-9, seed);
        let mut history = Vec::new();
        for c in 0..n {
            let column: Vec<f64> = (0..=c).map(|d| dot(&vecs[c], &vecs[d])).collect();
            solver.add(c % groups, rng.gen_range(0.0..1.0), column);
            let sol = solver.solve();
            prop_assert!(sol.alpha.iter().all(|&a| a >= 0.0));
            for g in 0..groups {
                prop_assert!(solver.group_mass(g) <= bound * (1.0 + 1e-12));
            }
            prop_assert!(sol.objective >= -1e-12);
            history.push(sol.objective);
        }
        prop_assert!(non_decreasing(&history, 1e-9), "{:?}", history);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cutting_plane_feasible_monotone_and_bounded(seed in 0u64..1000, c in prop::sample::select(vec![1.0, 100.0, 1e4]), map in prop::sample::select(vec![AttributeMapKind::Chi1, AttributeMapKind::Chi2])) {
        let dist = ca_dist(3, 3, 1.0);
        let data = sample_split(&dist, OutcomeRule::GreedyCa, Preprocess::default_for(dist.domain()), 30, seed, Split::Train).unwrap();
        let model = train(&data, &TrainingConfig::new(c, KernelConfig::Rbf { gamma: 0.5 }, map)).unwrap();
        let d = &model.diagnostics;
        prop_assert!(d.converged);
        prop_assert!(d.min_alpha >= 0.0);
        prop_assert!(d.max_box_excess <= 1e-9 * (c / 30.0).max(1.0));
        prop_assert!(non_decreasing(&d.objective_history, 1e-9), "{:?}", d.objective_history);
        if model.is_admissible() {
            prop_assert!(theorem_gap(&model, &data) <= 1e-6);
        }
    }
}

#[test]
fn trained_fixtures_satisfy_slack_bound() {
    let (model, data) = ca_model();
    assert!(model.is_admissible());
    assert!(theorem_gap(model, data) <= 1e-6);
}
