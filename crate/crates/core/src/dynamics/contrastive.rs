//! Learning affine abstract dynamics by matching composite query outputs of
//! encoded consecutive states.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{minimize, LearningConfig, StopReason, TraceEntry};
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{apply_query, kl_divergence_with, DivergenceSpec, QuerySet};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

use super::markov::{rollout_ensemble, MarkovSystem, Trajectory};

/// Maps a per-timestep marginal to an abstraction vector.
pub trait StateEncoder {
    fn dimension(&self) -> usize;
    fn encode(&self, marginal: &DiscreteDistribution) -> Result<Vec<f64>>;
}

/// The exact encoder: feature expectations under the marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationEncoder {
    pub features: Vec<FeatureFunction>,
}

impl StateEncoder for ExpectationEncoder {
    fn dimension(&self) -> usize {
        self.features.len()
    }

    fn encode(&self, marginal: &DiscreteDistribution) -> Result<Vec<f64>> {
        for f in &self.features {
            marginal.ensure_len(f.len())?;
        }
        Ok(ConstraintSet::moments_of(&self.features, marginal))
    }
}

/// Tabular encoder `a(x)` regressed from `(marginal, abstraction)` pairs; a
/// marginal is encoded as `Σ_x p(x) a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressedEncoder {
    /// `table[x]` is the abstraction vector assigned to state `x`.
    pub table: Vec<Vec<f64>>,
}

impl RegressedEncoder {
    /// Minimum-norm least-squares fit.
    pub fn fit(pairs: &[(DiscreteDistribution, Vec<f64>)]) -> Result<Self> {
        let (first, a0) = pairs.first().ok_or_else(|| Error::invalid("need at least one training pair"))?;
        let (n, d) = (first.len(), a0.len());
        if d == 0 {
            return Err(Error::invalid("abstraction vectors must be non-empty"));
        }
        for (p, a) in pairs {
            p.ensure_len(n)?;
            if a.len() != d {
                return Err(Error::invalid("abstraction vectors differ in length"));
            }
        }
        let design = DMatrix::from_fn(pairs.len(), n, |r, c| pairs[r].0.weights()[c]);
        let targets = DMatrix::from_fn(pairs.len(), d, |r, c| pairs[r].1[c]);
        let svd = design.svd(true, true);
        let w = svd
            .solve(&targets, 1e-12)
            .map_err(|e| Error::invalid(format!("encoder regression failed: {e}")))?;
        let table = (0..n).map(|x| (0..d).map(|j| w[(x, j)]).collect()).collect();
        Ok(RegressedEncoder { table })
    }
}

impl StateEncoder for RegressedEncoder {
    fn dimension(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    fn encode(&self, marginal: &DiscreteDistribution) -> Result<Vec<f64>> {
        marginal.ensure_len(self.table.len())?;
        let mut a = vec![0.0; self.dimension()];
        for (p, row) in marginal.weights().iter().zip(&self.table) {
            for (ai, v) in a.iter_mut().zip(row) {
                *ai += p * v;
            }
        }
        Ok(a)
    }
}

/// `â_t = W a_{t−1} + b` started from `initial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractDynamics {
    pub weights: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub initial: Vec<f64>,
}

impl AbstractDynamics {
    pub fn identity(initial: Vec<f64>) -> Self {
        let d = initial.len();
        AbstractDynamics {
            weights: (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            offset: vec![0.0; d],
            initial,
        }
    }

    pub fn dimension(&self) -> usize {
        self.offset.len()
    }

    pub fn step(&self, a: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    /// Abstract trajectory `a_0 … a_T`.
    pub fn rollout(&self, horizon: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.initial.clone()];
        for t in 0..horizon {
            let next = self.step(&out[t]);
            out.push(next);
        }
        out
    }

    fn from_params(theta: &[f64], initial: Vec<f64>) -> Self {
        let d = initial.len();
        AbstractDynamics {
            weights: theta[..d * d].chunks(d).map(<[f64]>::to_vec).collect(),
            offset: theta[d * d..].to_vec(),
            initial,
        }
    }

    fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(&self.offset).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsFit {
    pub dynamics: AbstractDynamics,
    pub loss: f64,
    pub gradient_norm: f64,
    pub stop: StopReason,
    pub trace: Vec<TraceEntry>,
    /// System rollout the encoder was applied to.
    pub trajectory: Trajectory,
    pub encoded: Vec<Vec<f64>>,
}

/// Composite query outputs `Q̃_i(a) = Q_i(m(a))` by direct solve.
fn composite(
    a: &[f64],
    features: &[FeatureFunction],
    n_states: usize,
    qs: &QuerySet,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let c = ConstraintSet::new(features.to_vec(), a.to_vec())?;
    let m = solve_maxent_on(n_states, &c, opts)?;
    qs.queries()
        .iter()
        .map(|q| apply_query(q, &m.distribution).map(|o| o.weights().to_vec()))
        .collect()
}

/// Contrastive objective `Σ_t Σ_i p(Q_i) D[Q̃_i(a_t) ‖ Q̃_i(W a_{t−1} + b)]`
/// over consecutive encoded states.
pub fn contrastive_loss(
    dynamics: &AbstractDynamics,
    encoded: &[Vec<f64>],
    features: &[FeatureFunction],
    n_states: usize,
    qs: &QuerySet,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<f64> {
    let truth = encoded
        .iter()
        .map(|a| composite(a, features, n_states, qs, opts))
        .collect::<Result<Vec<_>>>()?;
    contrastive_from(dynamics, encoded, &truth, features, n_states, qs, div, opts)
}

#[allow(clippy::too_many_arguments)]
fn contrastive_from(
    dynamics: &AbstractDynamics,
    encoded: &[Vec<f64>],
    truth: &[Vec<Vec<f64>>],
    features: &[FeatureFunction],
    n_states: usize,
    qs: &QuerySet,
    div: DivergenceSpec,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 1..encoded.len() {
        let predicted = dynamics.step(&encoded[t - 1]);
        let approx = composite(&predicted, features, n_states, qs, opts).map_err(|e| Error::AtTimestep {
            step: t,
            source: Box::new(e),
        })?;
        for ((p, q), w) in truth[t].iter().zip(&approx).zip(qs.weights()) {
            total += w * kl_divergence_with(div, p, q)?;
        }
    }
    Ok(total)
}

/// Fits `W, b` from the identity map. Trial parameters whose predictions leave
/// the feasible target range are rejected by the line search.
#[allow(clippy::too_many_arguments)]
pub fn learn_abstract_dynamics(
    system: &MarkovSystem,
    horizon: usize,
    encoder: &dyn StateEncoder,
    features: &[FeatureFunction],
    qs: &QuerySet,
    div: DivergenceSpec,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<DynamicsFit> {
    if encoder.dimension() != features.len() {
        return Err(Error::invalid(format!(
            "encoder dimension {} does not match {} features",
            encoder.dimension(),
            features.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::invalid("need a horizon of at least one step"));
    }
    let n = system.n_states();
    let trajectory = rollout_ensemble(system, horizon)?;
    let encoded = trajectory
        .marginals
        .iter()
        .map(|m| encoder.encode(m))
        .collect::<Result<Vec<_>>>()?;
    let truth = encoded
        .iter()
        .enumerate()
        .map(|(step, a)| {
            composite(a, features, n, qs, opts).map_err(|e| Error::AtTimestep {
                step,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let start = AbstractDynamics::identity(encoded[0].clone());
    let objective = |theta: &[f64]| {
        let dyn_ = AbstractDynamics::from_params(theta, encoded[0].clone());
        contrastive_from(&dyn_, &encoded, &truth, features, n, qs, div, opts)
    };
    let init = start.params();
    if let Err(e) = objective(&init) {
        return Err(Error::InfeasibleStep(format!("identity initialization is infeasible: {e}")));
    }
    let min = minimize(objective, &init, cfg)?;
    if min.stop == StopReason::MaxIters {
        return Err(Error::LearnerNonConvergence {
            iterations: min.trace.len() - 1,
            gradient_norm: min.gradient_norm,
            trace: min.trace,
        });
    }
    Ok(DynamicsFit {
        dynamics: AbstractDynamics::from_params(&min.x, encoded[0].clone()),
        loss: min.loss,
        gradient_norm: min.gradient_norm,
        stop: min.stop,
        trace: min.trace,
        trajectory,
        encoded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::loss::dynamical_loss;
    use crate::query::Query;

    fn indicator() -> Vec<FeatureFunction> {
        vec![FeatureFunction::indicator("in_0", 2, 0).unwrap()]
    }

    fn fit(alpha: f64, beta: f64) -> DynamicsFit {
        let sys = MarkovSystem::two_state(alpha, beta, DiscreteDistribution::new(vec![0.9, 0.1]).unwrap()).unwrap();
        let enc = ExpectationEncoder { features: indicator() };
        let qs = QuerySet::single(Query::reconstruction("r", 2).unwrap());
        learn_abstract_dynamics(
            &sys,
            10,
            &enc,
            &indicator(),
            &qs,
            DivergenceSpec::Kl,
            &LearningConfig::default(),
            &SolverOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn recovers_two_state_affine_map() {
        let (alpha, beta) = (0.2, 0.1);
        let f = fit(alpha, beta);
        assert!((f.dynamics.weights[0][0] - (1.0 - alpha - beta)).abs() < 1e-4, "{:?}", f.dynamics);
        assert!((f.dynamics.offset[0] - beta).abs() < 1e-4, "{:?}", f.dynamics);
        assert!(f.loss < 1e-8);
        for w in f.trace.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-9);
        }
    }

    #[test]
    fn induced_trajectory_has_no_path_loss() {
        let f = fit(0.2, 0.1);
        let a = f.dynamics.rollout(10);
        let qs = QuerySet::single(Query::reconstruction("r", 2).unwrap());
        let l = dynamical_loss(&f.trajectory, &a, &indicator(), &qs, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert!(l.total < 1e-8, "{}", l.total);
    }

    #[test]
    fn closed_form_map_has_zero_contrastive_loss() {
        let (alpha, beta) = (0.3, 0.15);
        let sys = MarkovSystem::two_state(alpha, beta, DiscreteDistribution::new(vec![0.8, 0.2]).unwrap()).unwrap();
        let traj = rollout_ensemble(&sys, 8).unwrap();
        let enc = ExpectationEncoder { features: indicator() };
        let encoded: Vec<_> = traj.marginals.iter().map(|m| enc.encode(m).unwrap()).collect();
        let exact = AbstractDynamics {
            weights: vec![vec![1.0 - alpha - beta]],
            offset: vec![beta],
            initial: encoded[0].clone(),
        };
        let qs = QuerySet::single(Query::reconstruction("r", 2).unwrap());
        let l = contrastive_loss(&exact, &encoded, &indicator(), 2, &qs, DivergenceSpec::Kl, &SolverOptions::default()).unwrap();
        assert!(l < 1e-12);
    }

    #[test]
    fn identity_chain_learns_identity() {
        let sys = MarkovSystem::new(
            crate::space::StateSpace::indexed(2).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            DiscreteDistribution::new(vec![0.7, 0.3]).unwrap(),
        )
        .unwrap();
        let enc = ExpectationEncoder { features: indicator() };
        let qs = QuerySet::single(Query::reconstruction("r", 2).unwrap());
        let f = learn_abstract_dynamics(
            &sys,
            5,
            &enc,
            &indicator(),
            &qs,
            DivergenceSpec::Kl,
            &LearningConfig::default(),
            &SolverOptions::default(),
        )
        .unwrap();
        // a constant trajectory only pins W·0.7 + b = 0.7; the start is already optimal
        let p = f.dynamics.step(&[0.7]);
        assert!((p[0] - 0.7).abs() < 1e-4);
        assert!((f.dynamics.weights[0][0] - 1.0).abs() < 1e-4);
        assert!(f.dynamics.offset[0].abs() < 1e-4);
    }

    #[test]
    fn regressed_encoder_recovers_table() {
        let table = vec![vec![1.0, 0.5], vec![0.0, -1.0], vec![2.0, 0.0]];
        let truth = RegressedEncoder { table: table.clone() };
        let marginals = [
            vec![0.2, 0.3, 0.5],
            vec![0.6, 0.1, 0.3],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let pairs: Vec<_> = marginals
            .iter()
            .map(|w| {
                let p = DiscreteDistribution::new(w.clone()).unwrap();
                let a = truth.encode(&p).unwrap();
                (p, a)
            })
            .collect();
        let fitted = RegressedEncoder::fit(&pairs).unwrap();
        for (row, expected) in fitted.table.iter().zip(&table) {
            for (a, b) in row.iter().zip(expected) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
