//! Leakiness of an abstraction: how far query answers computed from the
//! maxent reconstruction `m(a)` drift from answers computed on the system.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bridge::info::{mutual_information, JointDistribution};
use crate::error::{Error, Result};
use crate::maxent::{solve_maxent_on, MaxEntSolution, SolverOptions};
use crate::query::{apply_query, divergence, DivergenceSpec, Query, QueryKind, QuerySet};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

/// A fixed feature dictionary with a target vector `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionModel {
    pub features: Vec<FeatureFunction>,
    pub targets: Vec<f64>,
}

impl AbstractionModel {
    pub fn new(features: Vec<FeatureFunction>, targets: Vec<f64>) -> Result<Self> {
        ConstraintSet::new(features.clone(), targets.clone())?;
        Ok(AbstractionModel { features, targets })
    }

    /// Targets equal to the system's own feature means.
    pub fn matching(features: Vec<FeatureFunction>, system: &DiscreteDistribution) -> Self {
        let targets = ConstraintSet::moments_of(&features, system);
        AbstractionModel { features, targets }
    }

    pub fn dimension(&self) -> usize {
        self.targets.len()
    }

    pub fn constraints(&self) -> ConstraintSet {
        ConstraintSet {
            features: self.features.clone(),
            targets: self.targets.clone(),
        }
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Self {
        AbstractionModel {
            features: self.features.clone(),
            targets,
        }
    }

    /// `m(a)`: the maxent distribution under these targets.
    pub fn materialize(&self, n_states: usize, opts: &SolverOptions) -> Result<MaxEntSolution> {
        solve_maxent_on(n_states, &self.constraints(), opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub per_query_loss: Vec<(String, f64)>,
    pub total: f64,
    pub maxent_solution: MaxEntSolution,
}

pub const LOSS_CSV_HEADER: &str = "system,abstraction,query,loss";

impl LossReport {
    /// One CSV row per query, `system,abstraction,query,loss`.
    pub fn csv_rows(&self, system_id: &str, abstraction_id: &str) -> Vec<String> {
        self.per_query_loss
            .iter()
            .map(|(q, l)| format!("{system_id},{abstraction_id},{q},{l:.16e}"))
            .collect()
    }
}

/// `D[Q(p) ‖ Q(model)]` for an already materialized model distribution.
pub fn query_loss(
    system: &DiscreteDistribution,
    model: &DiscreteDistribution,
    query: &Query,
    div: DivergenceSpec,
) -> Result<f64> {
    let truth = apply_query(query, system)?;
    let approx = apply_query(query, model)?;
    divergence(div, &truth, &approx)
}

/// Per-query losses and their `p(Q_i)`-weighted total against a model distribution.
pub fn weighted_loss(
    system: &DiscreteDistribution,
    model: &DiscreteDistribution,
    qs: &QuerySet,
    div: DivergenceSpec,
) -> Result<(Vec<f64>, f64)> {
    let losses = qs
        .queries()
        .iter()
        .map(|q| query_loss(system, model, q, div))
        .collect::<Result<Vec<_>>>()?;
    let total = losses.iter().zip(qs.weights()).map(|(l, w)| l * w).sum();
    Ok((losses, total))
}

pub fn abstraction_loss(
    system: &DiscreteDistribution,
    abstraction: &AbstractionModel,
    query: &Query,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<f64> {
    let sol = abstraction.materialize(system.len(), opts)?;
    query_loss(system, &sol.distribution, query, div)
}

pub fn queryset_loss(
    system: &DiscreteDistribution,
    abstraction: &AbstractionModel,
    qs: &QuerySet,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<LossReport> {
    let sol = abstraction.materialize(system.len(), opts)?;
    let (losses, total) = weighted_loss(system, &sol.distribution, qs, div)?;
    Ok(LossReport {
        per_query_loss: qs
            .queries()
            .iter()
            .map(|q| q.name.clone())
            .zip(losses)
            .collect(),
        total,
        maxent_solution: sol,
    })
}

/// Resolution at which feature values are considered equal when building the
/// deterministic encoder `a(x)`.
pub const ENCODER_RESOLUTION: f64 = 1e-9;

/// Labels states by their feature vector, binned at `resolution`. Labels are
/// assigned in order of first appearance.
pub fn encoder_labels(features: &[FeatureFunction], n_states: usize, resolution: f64) -> Vec<usize> {
    let mut ids: HashMap<Vec<i64>, usize> = HashMap::new();
    (0..n_states)
        .map(|x| {
            let key: Vec<i64> = features
                .iter()
                .map(|f| (f.values[x] / resolution).round() as i64)
                .collect();
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectAbstractionReport {
    pub loss: f64,
    /// `I[g(X); X]` in nats.
    pub mi_qx: f64,
    /// `I[g(X); a(X)]` in nats.
    pub mi_qa: f64,
    pub gap: f64,
}

/// Loss plus the two mutual informations compared by the perfect-abstraction
/// argument, computed from exact joints over `(query output, state)` and
/// `(query output, encoder label)`.
pub fn perfect_abstraction_check(
    system: &DiscreteDistribution,
    abstraction: &AbstractionModel,
    query: &Query,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<PerfectAbstractionReport> {
    let map = match &query.kind {
        QueryKind::CoarseGrain { partition: map } | QueryKind::Pushforward { map } => map.clone(),
        _ => return Err(Error::UnsupportedQueryKind(query.kind_name().into())),
    };
    system.ensure_len(map.len())?;
    let loss = abstraction_loss(system, abstraction, query, div, opts)?;

    let n = system.len();
    let n_q = query.output_space.len();
    let labels = encoder_labels(&abstraction.features, n, ENCODER_RESOLUTION);
    let n_a = labels.iter().max().map_or(0, |m| m + 1);

    let mut joint_qx = vec![0.0; n_q * n];
    let mut joint_qa = vec![0.0; n_q * n_a];
    for x in 0..n {
        let p = system.weights()[x];
        joint_qx[map[x] * n + x] += p;
        joint_qa[map[x] * n_a + labels[x]] += p;
    }
    let mi_qx = mutual_information(&JointDistribution::new(vec![n_q, n], joint_qx)?)?;
    let mi_qa = mutual_information(&JointDistribution::new(vec![n_q, n_a], joint_qa)?)?;
    Ok(PerfectAbstractionReport {
        loss,
        mi_qx,
        mi_qa,
        gap: (mi_qx - mi_qa).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::analytic_boltzmann;

    fn energy(v: &[f64]) -> FeatureFunction {
        FeatureFunction::new("energy", v.to_vec()).unwrap()
    }

    fn boltzmann_system() -> (DiscreteDistribution, AbstractionModel) {
        let e = energy(&[0.0, 1.0, 2.0]);
        let dist = crate::maxent::gibbs_distribution(std::slice::from_ref(&e), &[1.0], 3).unwrap();
        let model = AbstractionModel::matching(vec![e], &dist);
        (dist, model)
    }

    #[test]
    fn fixed_point_has_zero_loss() {
        let (sys, model) = boltzmann_system();
        let opts = SolverOptions::default();
        for q in [
            Query::reconstruction("r", 3).unwrap(),
            Query::coarse_grain("c", vec![0, 1, 1]).unwrap(),
        ] {
            let l = abstraction_loss(&sys, &model, &q, DivergenceSpec::Kl, &opts).unwrap();
            assert!(l < 1e-8, "{l}");
        }
    }

    #[test]
    fn reconstruction_loss_matches_kl_to_boltzmann() {
        let sys = DiscreteDistribution::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let e = energy(&[0.0, 1.0, 2.0, 3.0]);
        let model = AbstractionModel::matching(vec![e.clone()], &sys);
        let q = Query::reconstruction("r", 4).unwrap();
        let l = abstraction_loss(&sys, &model, &q, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        let oracle = analytic_boltzmann(&e, model.targets[0]).unwrap();
        let kl: f64 = sys
            .weights()
            .iter()
            .zip(oracle.distribution.weights())
            .map(|(p, q)| p * (p / q).ln())
            .sum();
        assert!(l > 0.0);
        assert!((l - kl).abs() < 1e-10);
    }

    #[test]
    fn constant_query_never_leaks() {
        let sys = DiscreteDistribution::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let model = AbstractionModel::new(vec![energy(&[0.0, 1.0, 2.0, 3.0])], vec![2.5]).unwrap();
        let q = Query::constant("c", DiscreteDistribution::new(vec![0.3, 0.7]).unwrap()).unwrap();
        let l = abstraction_loss(&sys, &model, &q, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn queryset_total_is_weighted_mean() {
        let sys = DiscreteDistribution::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let model = AbstractionModel::new(vec![energy(&[0.0, 1.0, 2.0, 3.0])], vec![1.0]).unwrap();
        let q1 = Query::reconstruction("r", 4).unwrap();
        let q2 = Query::coarse_grain("c", vec![0, 0, 1, 1]).unwrap();
        let opts = SolverOptions::default();
        let l1 = abstraction_loss(&sys, &model, &q1, DivergenceSpec::Kl, &opts).unwrap();
        let l2 = abstraction_loss(&sys, &model, &q2, DivergenceSpec::Kl, &opts).unwrap();
        let qs = QuerySet::new(vec![q1.clone(), q2], vec![0.5, 0.5]).unwrap();
        let rep = queryset_loss(&sys, &model, &qs, DivergenceSpec::Kl, &opts).unwrap();
        assert!((rep.total - 0.5 * (l1 + l2)).abs() < 1e-15);
        let single = queryset_loss(&sys, &model, &QuerySet::single(q1), DivergenceSpec::Kl, &opts).unwrap();
        assert_eq!(single.total, l1);
        assert_eq!(rep.csv_rows("sys", "abs").len(), 2);
    }

    #[test]
    fn skewed_weights_on_fixed_point_vanish() {
        let (sys, model) = boltzmann_system();
        let qs = QuerySet::new(
            vec![
                Query::reconstruction("r", 3).unwrap(),
                Query::coarse_grain("c", vec![0, 0, 1]).unwrap(),
            ],
            vec![0.9, 0.1],
        )
        .unwrap();
        let rep = queryset_loss(&sys, &model, &qs, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert!(rep.total < 1e-8);
    }

    #[test]
    fn perfect_check_on_fixed_point() {
        let (sys, model) = boltzmann_system();
        let q = Query::coarse_grain("c", vec![0, 1, 1]).unwrap();
        let rep = perfect_abstraction_check(&sys, &model, &q, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert!(rep.loss < 1e-8);
        assert!(rep.gap < 1e-6);
    }

    #[test]
    fn all_to_one_bin_carries_no_information() {
        let (sys, model) = boltzmann_system();
        let q = Query::pushforward("flat", vec![0, 0, 0], 1).unwrap();
        let rep = perfect_abstraction_check(&sys, &model, &q, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert!(rep.mi_qx < 1e-15);
        assert!(rep.mi_qa < 1e-15);
    }

    #[test]
    fn perfect_check_rejects_reconstruction() {
        let (sys, model) = boltzmann_system();
        let q = Query::reconstruction("r", 3).unwrap();
        let err = perfect_abstraction_check(&sys, &model, &q, DivergenceSpec::Kl, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedQueryKind(_)));
    }

    #[test]
    fn encoder_merges_equal_feature_values() {
        let f = energy(&[1.0, 0.0, 1.0, 2.0]);
        assert_eq!(encoder_labels(&[f], 4, ENCODER_RESOLUTION), vec![0, 1, 0, 2]);
    }
}
