use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{weighted_loss, AbstractionModel};
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{DivergenceSpec, QuerySet};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

use super::optimize::{minimize, LearningConfig, StopReason, TraceEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFit {
    pub model: AbstractionModel,
    pub loss: f64,
    pub gradient_norm: f64,
    pub stop: StopReason,
    pub trace: Vec<TraceEntry>,
}

/// Mean query-set loss of the maxent reconstruction over several systems.
pub(crate) fn dataset_loss(
    systems: &[DiscreteDistribution],
    constraints: &ConstraintSet,
    qs: &QuerySet,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = systems[0].len();
    let model = solve_maxent_on(n, constraints, opts)?;
    let mut total = 0.0;
    for s in systems {
        total += weighted_loss(s, &model.distribution, qs, div)?.1;
    }
    Ok(total / systems.len() as f64)
}

pub(crate) fn pooled_moments(features: &[FeatureFunction], systems: &[DiscreteDistribution]) -> Vec<f64> {
    let mut means = vec![0.0; features.len()];
    for s in systems {
        for (m, v) in means.iter_mut().zip(ConstraintSet::moments_of(features, s)) {
            *m += v / systems.len() as f64;
        }
    }
    means
}

/// Learns the target vector `a` for a fixed feature dictionary by minimizing
/// the query-set loss, starting from the system's own feature means.
pub fn learn_targets(
    system: &DiscreteDistribution,
    features: &[FeatureFunction],
    qs: &QuerySet,
    div: DivergenceSpec,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<TargetFit> {
    learn_targets_dataset(std::slice::from_ref(system), features, qs, div, cfg, opts)
}

/// As [`learn_targets`] with the loss averaged over a dataset of systems that
/// share one abstraction.
pub fn learn_targets_dataset(
    systems: &[DiscreteDistribution],
    features: &[FeatureFunction],
    qs: &QuerySet,
    div: DivergenceSpec,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<TargetFit> {
    let init = pooled_moments(features, check_dataset(systems)?);
    learn_targets_from(systems, features, &init, qs, div, cfg, opts)
}

/// Same objective from an arbitrary feasible starting point.
pub fn learn_targets_from(
    systems: &[DiscreteDistribution],
    features: &[FeatureFunction],
    init: &[f64],
    qs: &QuerySet,
    div: DivergenceSpec,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<TargetFit> {
    check_dataset(systems)?;
    if init.len() != features.len() {
        return Err(Error::invalid("one initial target per feature"));
    }
    let objective = |a: &[f64]| -> Result<f64> {
        let c = ConstraintSet {
            features: features.to_vec(),
            targets: a.to_vec(),
        };
        dataset_loss(systems, &c, qs, div, opts)
    };
    let m = minimize(objective, init, cfg)?;
    if m.stop == StopReason::MaxIters {
        return Err(Error::LearnerNonConvergence {
            iterations: cfg.max_iters,
            gradient_norm: m.gradient_norm,
            trace: m.trace,
        });
    }
    Ok(TargetFit {
        model: AbstractionModel {
            features: features.to_vec(),
            targets: m.x,
        },
        loss: m.loss,
        gradient_norm: m.gradient_norm,
        stop: m.stop,
        trace: m.trace,
    })
}

pub(crate) fn check_dataset(systems: &[DiscreteDistribution]) -> Result<&[DiscreteDistribution]> {
    let first = systems
        .first()
        .ok_or_else(|| Error::invalid("dataset must be non-empty"))?;
    for s in systems {
        s.ensure_len(first.len())?;
    }
    Ok(systems)
}
