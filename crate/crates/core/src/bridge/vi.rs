//! Maxent as the stiff limit of a variational free-energy problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{solve_maxent_on, solve_soft_maxent, SolverOptions};
use crate::query::kl_divergence;
use crate::space::{ConstraintSet, FeatureFunction};

/// Constraint features with observed values. The reference measure is flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VIProblem {
    pub n_states: usize,
    pub features: Vec<FeatureFunction>,
    pub observations: Vec<f64>,
}

impl VIProblem {
    pub fn constraints(&self) -> Result<ConstraintSet> {
        ConstraintSet::new(self.features.clone(), self.observations.clone())
    }
}

/// Precision of a Gaussian constraint likelihood with standard deviation `sigma`.
pub fn precision_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma must be positive"));
    }
    Ok(1.0 / (2.0 * PI * sigma * sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViStep {
    pub lambda: f64,
    /// `KL(q*_λ ‖ p_maxent)`.
    pub kl_to_maxent: f64,
    pub free_energy: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    pub steps: Vec<ViStep>,
    pub nonincreasing: bool,
}

impl ViReport {
    pub fn final_kl(&self) -> Option<f64> {
        self.steps.last().map(|s| s.kl_to_maxent)
    }
}

/// Slack allowed when comparing consecutive KL values.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Solves `min_q E_q[ln q] + λ Σ_i (o_i − E_q f_i)²` for each `λ` and measures
/// the distance to the hard-constrained maxent solution.
pub fn vi_maxent_check(problem: &VIProblem, schedule: &[f64], opts: &SolverOptions) -> Result<ViReport> {
    if schedule.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("schedule entries must be finite and non-negative"));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("schedule must be strictly increasing"));
    }
    let constraints = problem.constraints()?;
    let maxent = solve_maxent_on(problem.n_states, &constraints, opts)?;
    let mut steps = Vec::with_capacity(schedule.len());
    for &lambda in schedule {
        let soft = solve_soft_maxent(problem.n_states, &constraints, lambda, None, opts)?;
        let kl = kl_divergence(soft.distribution.weights(), maxent.distribution.weights())?;
        let max_violation = constraints
            .features
            .iter()
            .zip(&constraints.targets)
            .map(|(f, c)| (soft.distribution.expectation(&f.values) - c).abs())
            .fold(0.0, f64::max);
        steps.push(ViStep {
            lambda,
            kl_to_maxent: kl,
            free_energy: soft.free_energy,
            max_violation,
        });
    }
    let nonincreasing = steps
        .windows(2)
        .all(|w| w[1].kl_to_maxent <= w[0].kl_to_maxent + MONOTONE_SLACK);
    Ok(ViReport { steps, nonincreasing })
}
