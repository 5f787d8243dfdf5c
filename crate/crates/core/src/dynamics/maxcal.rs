//! Maximum caliber as maximum entropy over the enumerated path space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{solve_maxent_on, MaxEntSolution, SolverOptions};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

/// Largest number of enumerated paths accepted.
pub const PATH_ENUMERATION_CAP: usize = 1_000_000;

/// All paths `(x_0, …, x_T)` over `n_states` states, in lexicographic order
/// (`x_0` most significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpace {
    pub n_states: usize,
    pub horizon: usize,
    len: usize,
}

impl PathSpace {
    pub fn new(n_states: usize, horizon: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("path space needs at least one state"));
        }
        let size = (n_states as u128).checked_pow(horizon as u32 + 1).unwrap_or(u128::MAX);
        if size > PATH_ENUMERATION_CAP as u128 {
            return Err(Error::PathSpaceTooLarge {
                size,
                cap: PATH_ENUMERATION_CAP,
            });
        }
        Ok(PathSpace {
            n_states,
            horizon,
            len: size as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// State occupied at time `t` on path `index`.
    pub fn state_at(&self, index: usize, t: usize) -> usize {
        let shift = self.horizon - t;
        (index / self.n_states.pow(shift as u32)) % self.n_states
    }

    pub fn path(&self, index: usize) -> Vec<usize> {
        (0..=self.horizon).map(|t| self.state_at(index, t)).collect()
    }

    /// Tabulates a path functional.
    pub fn feature(&self, name: impl Into<String>, f: impl Fn(&[usize]) -> f64) -> Result<FeatureFunction> {
        FeatureFunction::new(name, (0..self.len).map(|i| f(&self.path(i))).collect())
    }

    /// Fraction of timesteps spent in `state`.
    pub fn occupancy_feature(&self, state: usize) -> Result<FeatureFunction> {
        let steps = (self.horizon + 1) as f64;
        self.feature(format!("occupancy_{state}"), |p| {
            p.iter().filter(|&&s| s == state).count() as f64 / steps
        })
    }

    /// Indicator that the path ends in `state`.
    pub fn endpoint_feature(&self, state: usize) -> Result<FeatureFunction> {
        let last = self.horizon;
        self.feature(format!("ends_in_{state}"), move |p| f64::from(u8::from(p[last] == state)))
    }

    /// Indicator that the path is in `state` at time `t`.
    pub fn marginal_indicator(&self, t: usize, state: usize) -> Result<FeatureFunction> {
        self.feature(format!("x{t}_is_{state}"), move |p| f64::from(u8::from(p[t] == state)))
    }

    /// Time-`t` marginal of a path distribution.
    pub fn marginal(&self, paths: &DiscreteDistribution, t: usize) -> Result<DiscreteDistribution> {
        paths.ensure_len(self.len)?;
        let mut out = vec![0.0; self.n_states];
        for (i, p) in paths.weights().iter().enumerate() {
            out[self.state_at(i, t)] += p;
        }
        DiscreteDistribution::from_unnormalized(out)
    }

    /// Constraints pinning every per-timestep marginal. The last state at each
    /// time is implied by normalization and left out.
    pub fn marginal_constraints(&self, marginals: &[DiscreteDistribution]) -> Result<PathConstraintSet> {
        if marginals.len() != self.horizon + 1 {
            return Err(Error::invalid("need one marginal per timestep"));
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (t, m) in marginals.iter().enumerate() {
            m.ensure_len(self.n_states)?;
            for s in 0..self.n_states - 1 {
                features.push(self.marginal_indicator(t, s)?);
                targets.push(m.weights()[s]);
            }
        }
        Ok(PathConstraintSet { features, targets })
    }

    pub fn label(&self, index: usize) -> String {
        self.path(index)
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Path functionals (tabulated per enumerated path) with expectation targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConstraintSet {
    pub features: Vec<FeatureFunction>,
    pub targets: Vec<f64>,
}

impl PathConstraintSet {
    pub fn empty() -> Self {
        PathConstraintSet {
            features: Vec::new(),
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxCalSolution {
    pub paths: PathSpace,
    pub solution: MaxEntSolution,
}

impl MaxCalSolution {
    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.solution.distribution
    }

    pub fn marginal(&self, t: usize) -> Result<DiscreteDistribution> {
        self.paths.marginal(&self.solution.distribution, t)
    }
}

pub fn solve_maxcal(
    n_states: usize,
    horizon: usize,
    constraints: &PathConstraintSet,
    opts: &SolverOptions,
) -> Result<MaxCalSolution> {
    let paths = PathSpace::new(n_states, horizon)?;
    let c = ConstraintSet::new(constraints.features.clone(), constraints.targets.clone())?;
    let solution = solve_maxent_on(paths.len(), &c, opts)?;
    Ok(MaxCalSolution { paths, solution })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order() {
        let ps = PathSpace::new(2, 2).unwrap();
        assert_eq!(ps.len(), 8);
        assert_eq!(ps.path(0), vec![0, 0, 0]);
        assert_eq!(ps.path(5), vec![1, 0, 1]);
        assert_eq!(ps.label(6), "1-1-0");
    }

    #[test]
    fn unconstrained_is_uniform_over_paths() {
        let sol = solve_maxcal(2, 3, &PathConstraintSet::empty(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.paths.len(), 16);
        assert!(sol.distribution().weights().iter().all(|&w| w == 1.0 / 16.0));
    }

    #[test]
    fn endpoint_constraint_selects_paths_ending_in_state() {
        let ps = PathSpace::new(2, 2).unwrap();
        let c = PathConstraintSet {
            features: vec![ps.endpoint_feature(1).unwrap()],
            targets: vec![1.0],
        };
        let sol = solve_maxcal(2, 2, &c, &SolverOptions::default()).unwrap();
        for (i, w) in sol.distribution().weights().iter().enumerate() {
            let expected = if ps.path(i)[2] == 1 { 0.25 } else { 0.0 };
            assert_eq!(*w, expected);
        }
    }

    #[test]
    fn too_many_paths() {
        let err = PathSpace::new(10, 6).unwrap_err();
        assert!(matches!(err, Error::PathSpaceTooLarge { .. }));
    }

    #[test]
    fn infeasible_occupancy() {
        let ps = PathSpace::new(2, 2).unwrap();
        let c = PathConstraintSet {
            features: vec![ps.occupancy_feature(0).unwrap()],
            targets: vec![1.5],
        };
        let err = solve_maxcal(2, 2, &c, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleConstraints { .. }));
    }
}
