use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::SolverOptions;
use crate::query::{DivergenceSpec, QuerySet};
use crate::space::{DiscreteDistribution, FeatureFunction};

use super::optimize::LearningConfig;
use super::targets::learn_targets;

pub const DEFAULT_PLATEAU_DELTA: f64 = 0.01;

/// Losses below this are treated as equal; relative plateau tests are
/// meaningless among values at rounding level.
pub const PLATEAU_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub index: usize,
    pub dimension: usize,
    pub loss: Option<f64>,
    pub targets: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSelection {
    pub selected: usize,
    pub table: Vec<CandidateFit>,
}

/// Fits every candidate feature set and keeps the smallest one whose loss is
/// within `(1 + plateau_delta)` of the best.
pub fn select_dimension(
    system: &DiscreteDistribution,
    candidates: &[Vec<FeatureFunction>],
    qs: &QuerySet,
    div: DivergenceSpec,
    cfg: &LearningConfig,
    opts: &SolverOptions,
    plateau_delta: f64,
) -> Result<DimensionSelection> {
    if !(plateau_delta > 0.0) {
        return Err(Error::invalid("plateau_delta must be positive"));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("need at least one candidate feature set"));
    }
    let table: Vec<CandidateFit> = candidates
        .iter()
        .enumerate()
        .map(|(index, feats)| match learn_targets(system, feats, qs, div, cfg, opts) {
            Ok(fit) => CandidateFit {
                index,
                dimension: feats.len(),
                loss: Some(fit.loss),
                targets: Some(fit.model.targets),
                error: None,
            },
            Err(e) => CandidateFit {
                index,
                dimension: feats.len(),
                loss: None,
                targets: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let best = table
        .iter()
        .filter_map(|c| c.loss)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::invalid("every candidate feature set failed to fit"));
    }
    let threshold = (1.0 + plateau_delta) * best + PLATEAU_FLOOR;
    let selected = table
        .iter()
        .filter(|c| c.loss.is_some_and(|l| l <= threshold))
        .min_by_key(|c| (c.dimension, c.index))
        .map(|c| c.index)
        .unwrap_or(0);
    Ok(DimensionSelection { selected, table })
}
