use abstraction_core::bridge::{
    conditional_mutual_information, marginal_entropy, mutual_information_between, JointDistribution,
};
use abstraction_core::dynamics::{rollout_ensemble, MarkovSystem};
use abstraction_core::maxent::dual_objective;
use abstraction_core::query::kl_divergence;
use abstraction_core::space::entropy;
use abstraction_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn simplex(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

/// Energies with a spread of at least 0.5 and a target strictly inside the range.
fn energy_problem() -> impl Strategy<Value = (Vec<f64>, f64)> {
    prop::collection::vec(-3.0f64..3.0, 2..=6)
        .prop_filter("needs spread", |e| {
            let (lo, hi) = bounds(e);
            hi - lo > 0.5
        })
        .prop_flat_map(|e| {
            let (lo, hi) = bounds(&e);
            let span = hi - lo;
            (Just(e), (lo + 0.05 * span)..(hi - 0.05 * span))
        })
}

fn bounds(e: &[f64]) -> (f64, f64) {
    (
        e.iter().copied().fold(f64::INFINITY, f64::min),
        e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn solve(e: &[f64], c: f64) -> MaxEntSolution {
    let cs = ConstraintSet::new(vec![FeatureFunction::new("E", e.to_vec()).unwrap()], vec![c]).unwrap();
    solve_maxent_on(e.len(), &cs, &SolverOptions::default()).unwrap()
}

fn markov() -> impl Strategy<Value = MarkovSystem> {
    (2usize..=4).prop_flat_map(|n| {
        (prop::collection::vec(simplex(n..=n), n), simplex(n..=n)).prop_map(move |(rows, init)| {
            MarkovSystem::new(
                StateSpace::indexed(n).unwrap(),
                rows,
                DiscreteDistribution::new(init).unwrap(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn maxent_beats_feasible_perturbations((e, c) in energy_problem(), dir in prop::collection::vec(-1.0f64..1.0, 6), t in 0.001f64..0.05) {
        let sol = solve(&e, c);
        let p = sol.distribution.weights();
        let n = e.len();
        // project the direction onto {Σd = 0, Σ d·E = 0}
        let a = DMatrix::from_fn(2, n, |i, j| if i == 0 { 1.0 } else { e[j] });
        let d = DVector::from_column_slice(&dir[..n]);
        let gram = &a * a.transpose();
        let coef = gram.try_inverse().unwrap() * (&a * &d);
        let d = d - a.transpose() * coef;
        prop_assume!(d.norm() > 1e-6);
        // a uniform step keeps the perturbation inside the feasible set
        let scale = t * p.iter().copied().fold(f64::INFINITY, f64::min) / d.amax();
        let q: Vec<f64> = p.iter().zip(d.iter()).map(|(p, di)| p + scale * di).collect();
        let mean: f64 = q.iter().zip(&e).map(|(q, x)| q * x).sum();
        prop_assert!((mean - c).abs() < 1e-9 && (q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assume!(q.iter().all(|&x| x > 0.0));
        prop_assert!(entropy(&q) <= sol.entropy + 1e-12);
    }

    #[test]
    fn exponential_form((e, c) in energy_problem()) {
        let sol = solve(&e, c);
        let l = sol.multipliers[0];
        let v: Vec<f64> = sol.distribution.weights().iter().zip(&e).map(|(p, x)| p.ln() + l * x).collect();
        let (lo, hi) = bounds(&v);
        prop_assert!(hi - lo < 1e-9);
        prop_assert!(sol.max_residual() < 1e-10);
    }

    #[test]
    fn dual_is_convex_and_minimized_at_solution((e, c) in energy_problem(), a in -4.0f64..4.0, b in -4.0f64..4.0, t in 0.0f64..1.0) {
        let cs = ConstraintSet::new(vec![FeatureFunction::new("E", e.clone()).unwrap()], vec![c]).unwrap();
        let mid = dual_objective(&cs, &[t * a + (1.0 - t) * b]);
        let chord = t * dual_objective(&cs, &[a]) + (1.0 - t) * dual_objective(&cs, &[b]);
        prop_assert!(mid <= chord + 1e-12);
        let star = solve(&e, c).multipliers[0];
        prop_assert!(dual_objective(&cs, &[star]) <= dual_objective(&cs, &[a]) + 1e-12);
    }

    #[test]
    fn gibbs_inequality(p in simplex(2..=8), q_raw in prop::collection::vec(0.05f64..1.0, 8)) {
        let n = p.len();
        let s: f64 = q_raw[..n].iter().sum();
        let q: Vec<f64> = q_raw[..n].iter().map(|x| x / s).collect();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    /// Coarse-graining can only hide discrepancies, and refining a partition
    /// can only reveal them.
    #[test]
    fn refinement_is_monotone(p in simplex(4..=8), q in simplex(8..=8), blocks in prop::collection::vec(0usize..2, 8), split in prop::collection::vec(0usize..2, 8)) {
        let n = p.len();
        let s: f64 = q[..n].iter().sum();
        let model = DiscreteDistribution::new(q[..n].iter().map(|x| x / s).collect()).unwrap();
        let sys = DiscreteDistribution::new(p).unwrap();
        let coarse: Vec<usize> = blocks[..n].to_vec();
        prop_assume!(coarse.iter().any(|&b| b == 0) && coarse.iter().any(|&b| b == 1));
        let fine: Vec<usize> = coarse.iter().zip(&split).map(|(b, s)| 2 * b + s).collect();
        let mut used: Vec<usize> = fine.clone();
        used.sort_unstable();
        used.dedup();
        let relabel: Vec<usize> = fine.iter().map(|f| used.binary_search(f).unwrap()).collect();
        let loss = |q: Query| eval::query_loss(&sys, &model, &q, DivergenceSpec::Kl).unwrap();
        let l_coarse = loss(Query::coarse_grain("c", coarse).unwrap());
        let l_fine = loss(Query::coarse_grain("f", relabel).unwrap());
        let l_full = loss(Query::reconstruction("r", n).unwrap());
        prop_assert!(l_coarse <= l_fine + 1e-12);
        prop_assert!(l_fine <= l_full + 1e-12);
    }

    #[test]
    fn mutual_information_chain_rule(shape in prop::collection::vec(2usize..=3, 3), masses in prop::collection::vec(0.0f64..1.0, 27)) {
        let len: usize = shape.iter().product();
        prop_assume!(masses[..len].iter().sum::<f64>() > 0.1);
        let j = JointDistribution::from_masses(shape, masses[..len].to_vec()).unwrap();
        let total = mutual_information_between(&j, &[0], &[1, 2]).unwrap();
        let first = mutual_information_between(&j, &[0], &[2]).unwrap();
        let second = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
        prop_assert!((total - first - second).abs() < 1e-12);
        prop_assert!(total <= marginal_entropy(&j, &[0]) + 1e-12);
        prop_assert!(second >= -1e-15);
    }

    #[test]
    fn rollout_matches_matrix_power(sys in markov(), horizon in 0usize..12) {
        let n = sys.n_states();
        let traj = rollout_ensemble(&sys, horizon).unwrap();
        let p = DMatrix::from_fn(n, n, |i, j| sys.transition[i][j]);
        let mut row = DVector::from_column_slice(sys.initial.weights()).transpose();
        for t in 0..=horizon {
            for (a, b) in traj.marginals[t].weights().iter().zip(row.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            row = &row * &p;
        }
    }

    #[test]
    fn rollout_is_linear_in_the_initial_state(sys in markov(), other in simplex(4..=4), w in 0.0f64..1.0) {
        let n = sys.n_states();
        let s: f64 = other[..n].iter().sum();
        let q = DiscreteDistribution::new(other[..n].iter().map(|x| x / s).collect()).unwrap();
        let with = |init: DiscreteDistribution| {
            rollout_ensemble(&MarkovSystem::new(sys.space.clone(), sys.transition.clone(), init).unwrap(), 6).unwrap()
        };
        let mix: Vec<f64> = sys.initial.weights().iter().zip(q.weights()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let (ta, tb, tm) = (with(sys.initial.clone()), with(q), with(DiscreteDistribution::from_unnormalized(mix).unwrap()));
        for t in 0..=6 {
            for x in 0..n {
                let lin = w * ta.marginals[t].weights()[x] + (1.0 - w) * tb.marginals[t].weights()[x];
                prop_assert!((tm.marginals[t].weights()[x] - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn horizons_compose(sys in markov(), t1 in 0usize..6, t2 in 0usize..6) {
        let whole = rollout_ensemble(&sys, t1 + t2).unwrap();
        let head = rollout_ensemble(&sys, t1).unwrap();
        let mid = head.marginals[t1].clone();
        let tail = rollout_ensemble(&MarkovSystem::new(sys.space.clone(), sys.transition.clone(), mid).unwrap(), t2).unwrap();
        for t in 0..=t2 {
            for (a, b) in whole.marginals[t1 + t].weights().iter().zip(tail.marginals[t].weights()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn abstractability_never_exceeds_entropy(masses in prop::collection::vec(0.0f64..1.0, 15..40), eps in 1e-4f64..1e-1) {
        use abstraction_core::abstractability::{abstractability_score, TargetDensity};
        prop_assume!(masses.iter().sum::<f64>() > 0.5);
        let coords: Vec<f64> = (0..masses.len()).map(|i| i as f64 * 0.25).collect();
        let t = TargetDensity::from_masses(coords, masses, None).unwrap();
        let r = abstractability_score(&t, 4, eps, &learn::LearningConfig::default()).unwrap();
        prop_assert!(r.score >= 0.0);
        prop_assert!(r.score <= t.entropy() + 1e-9);
        prop_assert!(r.fit_error <= eps);
    }
}
