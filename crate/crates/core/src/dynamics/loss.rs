use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::weighted_loss;
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{DivergenceSpec, QuerySet};
use crate::space::{ConstraintSet, FeatureFunction};

use super::markov::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalLoss {
    pub total: f64,
    /// Weighted query loss at each timestep `t = 0..=T`.
    pub per_step: Vec<f64>,
}

impl DynamicalLoss {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,loss\n");
        for (t, l) in self.per_step.iter().enumerate() {
            out.push_str(&format!("{t},{l:.16e}\n"));
        }
        out
    }
}

/// Discrete path integral `Σ_t Σ_i p(Q_i) D[Q_i(x_t) ‖ Q_i(m(a_t))]`.
pub fn dynamical_loss(
    system_traj: &Trajectory,
    abstract_traj: &[Vec<f64>],
    features: &[FeatureFunction],
    qs: &QuerySet,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<DynamicalLoss> {
    if system_traj.marginals.len() != abstract_traj.len() {
        return Err(Error::invalid(format!(
            "system trajectory has {} steps but abstract trajectory has {}",
            system_traj.marginals.len(),
            abstract_traj.len()
        )));
    }
    let mut per_step = Vec::with_capacity(abstract_traj.len());
    for (step, (marginal, a)) in system_traj.marginals.iter().zip(abstract_traj).enumerate() {
        let at = |e: Error| Error::AtTimestep {
            step,
            source: Box::new(e),
        };
        let c = ConstraintSet::new(features.to_vec(), a.clone()).map_err(at)?;
        let model = solve_maxent_on(marginal.len(), &c, opts).map_err(at)?;
        let (_, loss) = weighted_loss(marginal, &model.distribution, qs, div).map_err(at)?;
        per_step.push(loss);
    }
    Ok(DynamicalLoss {
        total: per_step.iter().sum(),
        per_step,
    })
}
