//! State spaces, normalized distributions over them, and feature tables.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ weights = 1` accepted by [`DiscreteDistribution::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Real-valued embedding of a state space, used for gridded continuous densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub coordinates: Vec<f64>,
    pub spacing: f64,
}

/// An ordered, enumerated set of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStateSpace")]
pub struct StateSpace {
    states: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Grid>,
}

#[derive(Deserialize)]
struct RawStateSpace {
    states: Vec<String>,
    #[serde(default)]
    grid: Option<Grid>,
}

impl TryFrom<RawStateSpace> for StateSpace {
    type Error = Error;

    fn try_from(raw: RawStateSpace) -> Result<Self> {
        match raw.grid {
            Some(grid) => StateSpace::with_grid(raw.states, grid),
            None => StateSpace::new(raw.states),
        }
    }
}

impl StateSpace {
    pub fn new(states: Vec<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("state space must be non-empty"));
        }
        let mut seen = HashSet::with_capacity(states.len());
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::invalid(format!("duplicate state identifier `{s}`")));
            }
        }
        Ok(StateSpace { states, grid: None })
    }

    /// States labelled `s0 … s{n-1}`.
    pub fn indexed(n: usize) -> Result<Self> {
        StateSpace::new((0..n).map(|i| format!("s{i}")).collect())
    }

    pub fn with_grid(states: Vec<String>, grid: Grid) -> Result<Self> {
        let mut space = StateSpace::new(states)?;
        if grid.coordinates.len() != space.states.len() {
            return Err(Error::invalid("grid coordinates must align with states"));
        }
        if !(grid.spacing > 0.0 && grid.spacing.is_finite()) {
            return Err(Error::invalid("grid spacing must be strictly positive"));
        }
        if grid.coordinates.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("grid coordinates must be finite"));
        }
        space.grid = Some(grid);
        Ok(space)
    }

    /// Uniform grid `lo, lo + step, …` up to and including `hi` (within rounding).
    pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::invalid("uniform grid needs lo <= hi and step > 0"));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let coordinates: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
        let states = (0..n).map(|i| format!("g{i}")).collect();
        StateSpace::with_grid(
            states,
            Grid {
                coordinates,
                spacing: step,
            },
        )
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn coordinates(&self) -> Option<&[f64]> {
        self.grid.as_ref().map(|g| g.coordinates.as_slice())
    }
}

/// Normalized probability weights aligned with a state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteDistribution {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        DiscreteDistribution::new(w)
    }
}

impl From<DiscreteDistribution> for Vec<f64> {
    fn from(d: DiscreteDistribution) -> Self {
        d.weights
    }
}

impl DiscreteDistribution {
    /// Validates non-negativity and normalization within [`NORMALIZATION_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("distribution must be non-empty"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("weight {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 1 within {NORMALIZATION_TOL:e}"
            )));
        }
        Ok(DiscreteDistribution { weights })
    }

    /// Rescales non-negative masses to sum to one.
    pub fn from_unnormalized(masses: Vec<f64>) -> Result<Self> {
        if let Some(w) = masses.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("mass {w} is negative or non-finite")));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("masses must have positive total"));
        }
        Ok(DiscreteDistribution {
            weights: masses.into_iter().map(|m| m / total).collect(),
        })
    }

    /// Normalizes `exp(log_weights)` with a max shift; `-inf` entries become zero.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::invalid("log weights have no finite maximum"));
        }
        DiscreteDistribution::from_unnormalized(log_weights.iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("distribution must be non-empty"));
        }
        Ok(DiscreteDistribution {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::invalid("point mass index out of range"));
        }
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Ok(DiscreteDistribution { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn ensure_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected,
                found: self.len(),
            })
        }
    }
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy(weights: &[f64]) -> f64 {
    let h: f64 = weights.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    // avoid reporting -0 for a point mass
    h.max(0.0)
}

/// A named feature `f(x)` tabulated once per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFunction {
    pub name: String,
    pub values: Vec<f64>,
}

impl FeatureFunction {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::invalid(format!("feature `{name}` has no values")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature `{name}` has non-finite values")));
        }
        Ok(FeatureFunction { name, values })
    }

    /// Indicator of a single state.
    pub fn indicator(name: impl Into<String>, n: usize, state: usize) -> Result<Self> {
        let mut values = vec![0.0; n];
        if state >= n {
            return Err(Error::invalid("indicator state out of range"));
        }
        values[state] = 1.0;
        FeatureFunction::new(name, values)
    }

    /// `(x - center)^2` over the grid coordinates.
    pub fn squared_deviation(space: &StateSpace, center: f64) -> Result<Self> {
        let coords = space
            .coordinates()
            .ok_or_else(|| Error::invalid("squared deviation needs grid coordinates"))?;
        FeatureFunction::new(
            "squared_deviation",
            coords.iter().map(|x| (x - center).powi(2)).collect(),
        )
    }

    /// The grid coordinate itself.
    pub fn coordinate(space: &StateSpace) -> Result<Self> {
        let coords = space
            .coordinates()
            .ok_or_else(|| Error::invalid("coordinate feature needs grid coordinates"))?;
        FeatureFunction::new("coordinate", coords.to_vec())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Feature functions paired with expectation targets `E_p[f_i] = c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub features: Vec<FeatureFunction>,
    pub targets: Vec<f64>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        ConstraintSet {
            features: Vec::new(),
            targets: Vec::new(),
        }
    }

    /// Checks arity, table lengths against `n_states`, and per-feature range membership.
    pub fn new(features: Vec<FeatureFunction>, targets: Vec<f64>) -> Result<Self> {
        let set = ConstraintSet { features, targets };
        set.check_arity()?;
        Ok(set)
    }

    fn check_arity(&self) -> Result<()> {
        if self.features.len() != self.targets.len() {
            return Err(Error::invalid(format!(
                "{} features but {} targets",
                self.features.len(),
                self.targets.len()
            )));
        }
        if let Some(t) = self.targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("target {t} is not finite")));
        }
        Ok(())
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        self.check_arity()?;
        for f in &self.features {
            if f.len() != n_states {
                return Err(Error::SpaceMismatch {
                    expected: n_states,
                    found: f.len(),
                });
            }
        }
        for (f, &t) in self.features.iter().zip(&self.targets) {
            let (lo, hi) = (f.min(), f.max());
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if t < lo - slack || t > hi + slack {
                return Err(Error::InfeasibleConstraints {
                    feature: f.name.clone(),
                    target: t,
                    min: lo,
                    max: hi,
                });
            }
        }
        Ok(())
    }

    /// Empirical feature means under `dist`, i.e. the targets `dist` itself satisfies.
    pub fn moments_of(features: &[FeatureFunction], dist: &DiscreteDistribution) -> Vec<f64> {
        features.iter().map(|f| dist.expectation(&f.values)).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}
