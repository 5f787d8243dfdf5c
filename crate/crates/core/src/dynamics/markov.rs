use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{DiscreteDistribution, StateSpace, NORMALIZATION_TOL};

/// Default cap on rollout horizons.
pub const DEFAULT_HORIZON_CAP: usize = 100_000;

/// Discrete-time Markov dynamics with a row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarkov")]
pub struct MarkovSystem {
    pub space: StateSpace,
    /// `transition[i][j] = P(x_{t+1} = j | x_t = i)`.
    pub transition: Vec<Vec<f64>>,
    pub initial: DiscreteDistribution,
}

#[derive(Deserialize)]
struct RawMarkov {
    #[serde(default)]
    space: Option<StateSpace>,
    transition: Vec<Vec<f64>>,
    initial: DiscreteDistribution,
}

impl TryFrom<RawMarkov> for MarkovSystem {
    type Error = Error;
    fn try_from(raw: RawMarkov) -> Result<Self> {
        let space = match raw.space {
            Some(s) => s,
            None => StateSpace::indexed(raw.transition.len())?,
        };
        MarkovSystem::new(space, raw.transition, raw.initial)
    }
}

impl MarkovSystem {
    pub fn new(space: StateSpace, transition: Vec<Vec<f64>>, initial: DiscreteDistribution) -> Result<Self> {
        let n = space.len();
        initial.ensure_len(n)?;
        if transition.len() != n {
            return Err(Error::SpaceMismatch {
                expected: n,
                found: transition.len(),
            });
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::SpaceMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(format!("transition row {i} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::invalid(format!("transition row {i} sums to {total}")));
            }
        }
        Ok(MarkovSystem {
            space,
            transition,
            initial,
        })
    }

    /// Two-state chain with `P(0→1) = flip_out` and `P(1→0) = flip_in`.
    pub fn two_state(flip_out: f64, flip_in: f64, initial: DiscreteDistribution) -> Result<Self> {
        MarkovSystem::new(
            StateSpace::indexed(2)?,
            vec![vec![1.0 - flip_out, flip_out], vec![flip_in, 1.0 - flip_in]],
            initial,
        )
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    /// One exact ensemble step `p · T`.
    pub fn step(&self, p: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        p.ensure_len(self.n_states())?;
        let n = self.n_states();
        let mut next = vec![0.0; n];
        for (i, &pi) in p.weights().iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, t) in self.transition[i].iter().enumerate() {
                next[j] += pi * t;
            }
        }
        DiscreteDistribution::from_unnormalized(next)
    }
}

/// Ensemble marginals for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub marginals: Vec<DiscreteDistribution>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.marginals.len().saturating_sub(1)
    }

    /// Long-format CSV: `t,state,probability`.
    pub fn to_csv(&self, space: &StateSpace) -> String {
        let mut out = String::from("t,state,probability\n");
        for (t, m) in self.marginals.iter().enumerate() {
            for (s, p) in space.states().iter().zip(m.weights()) {
                out.push_str(&format!("{t},{s},{p:.16e}\n"));
            }
        }
        out
    }
}

pub fn rollout_ensemble(system: &MarkovSystem, horizon: usize) -> Result<Trajectory> {
    rollout_ensemble_capped(system, horizon, DEFAULT_HORIZON_CAP)
}

pub fn rollout_ensemble_capped(system: &MarkovSystem, horizon: usize, cap: usize) -> Result<Trajectory> {
    if horizon > cap {
        return Err(Error::HorizonOverflow { horizon, cap });
    }
    let mut marginals = Vec::with_capacity(horizon + 1);
    marginals.push(system.initial.clone());
    for t in 0..horizon {
        let next = system.step(&marginals[t])?;
        marginals.push(next);
    }
    Ok(Trajectory { marginals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    #[test]
    fn identity_transition_is_fixed() {
        let sys = MarkovSystem::new(
            StateSpace::indexed(3).unwrap(),
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            dist(&[0.2, 0.5, 0.3]),
        )
        .unwrap();
        let traj = rollout_ensemble(&sys, 5).unwrap();
        assert_eq!(traj.marginals.len(), 6);
        assert!(traj.marginals.iter().all(|m| *m == sys.initial));
    }

    #[test]
    fn doubly_stochastic_keeps_uniform() {
        let sys = MarkovSystem::new(
            StateSpace::indexed(3).unwrap(),
            vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.2, 0.3], vec![0.3, 0.5, 0.2]],
            DiscreteDistribution::uniform(3).unwrap(),
        )
        .unwrap();
        for m in rollout_ensemble(&sys, 7).unwrap().marginals {
            for w in m.weights() {
                assert!((w - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fair_flip_mixes_in_one_step() {
        let sys = MarkovSystem::two_state(0.5, 0.5, dist(&[1.0, 0.0])).unwrap();
        let traj = rollout_ensemble(&sys, 1).unwrap();
        assert_eq!(traj.marginals[1].weights(), &[0.5, 0.5]);
    }

    #[test]
    fn horizon_cap_enforced() {
        let sys = MarkovSystem::two_state(0.5, 0.5, dist(&[1.0, 0.0])).unwrap();
        let err = rollout_ensemble_capped(&sys, 11, 10).unwrap_err();
        assert!(matches!(err, Error::HorizonOverflow { horizon: 11, cap: 10 }));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let r = MarkovSystem::new(
            StateSpace::indexed(2).unwrap(),
            vec![vec![0.5, 0.6], vec![0.5, 0.5]],
            dist(&[1.0, 0.0]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn json_without_space() {
        let s = r#"{"transition":[[0.9,0.1],[0.2,0.8]],"initial":[1.0,0.0]}"#;
        let sys: MarkovSystem = serde_json::from_str(s).unwrap();
        assert_eq!(sys.n_states(), 2);
    }
}
