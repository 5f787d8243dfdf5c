//! Per-datapoint abstractions `ā` learned jointly with shared targets `a`.
//!
//! Each datapoint is reconstructed from the concatenated constraint set
//! `m([a, ā_i])`. Optimization alternates full sweeps over `a` (with every
//! `ā_i` frozen) and over each `ā_i` (with `a` frozen), so the joint loss can
//! only go down between sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{weighted_loss, AbstractionModel};
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{DivergenceSpec, QuerySet};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

use super::optimize::{minimize, LearningConfig, TraceEntry};
use super::targets::{check_dataset, pooled_moments};

/// Tabular encoder: one target vector per datapoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderAbstraction {
    pub features: Vec<FeatureFunction>,
    pub table: Vec<Vec<f64>>,
}

impl EncoderAbstraction {
    pub fn targets_for(&self, datapoint: usize) -> Option<&[f64]> {
        self.table.get(datapoint).map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// Every datapoint gets its own `ā_i`.
    #[default]
    PerDatapoint,
    /// A single `ā` shared by all datapoints.
    Tied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderFit {
    pub shared: AbstractionModel,
    pub encoder: EncoderAbstraction,
    pub loss: f64,
    /// Joint loss after each sweep; entry 0 is the initial point.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

/// Hard cap on alternation sweeps.
pub const MAX_SWEEPS: usize = 100;

struct Problem<'a> {
    systems: &'a [DiscreteDistribution],
    shared: &'a [FeatureFunction],
    local: &'a [FeatureFunction],
    qs: &'a QuerySet,
    div: DivergenceSpec,
    opts: &'a SolverOptions,
}

impl Problem<'_> {
    fn point_loss(&self, i: usize, a: &[f64], abar: &[f64]) -> Result<f64> {
        let constraints = ConstraintSet {
            features: self.shared.iter().chain(self.local).cloned().collect(),
            targets: a.iter().chain(abar).copied().collect(),
        };
        let n = self.systems[i].len();
        let m = solve_maxent_on(n, &constraints, self.opts)?;
        Ok(weighted_loss(&self.systems[i], &m.distribution, self.qs, self.div)?.1)
    }

    fn joint_loss(&self, a: &[f64], table: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for (i, abar) in table.iter().enumerate() {
            total += self.point_loss(i, a, abar)?;
        }
        Ok(total / self.systems.len() as f64)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn learn_encoder(
    dataset: &[DiscreteDistribution],
    shared_features: &[FeatureFunction],
    encoder_features: &[FeatureFunction],
    qs: &QuerySet,
    div: DivergenceSpec,
    mode: EncoderMode,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<EncoderFit> {
    check_dataset(dataset)?;
    for f in encoder_features {
        if shared_features.iter().any(|g| g.name == f.name || g.values == f.values) {
            return Err(Error::invalid(format!(
                "feature `{}` appears in both the shared and the encoder block",
                f.name
            )));
        }
    }
    let problem = Problem {
        systems: dataset,
        shared: shared_features,
        local: encoder_features,
        qs,
        div,
        opts,
    };

    let mut a = pooled_moments(shared_features, dataset);
    let pooled_local = pooled_moments(encoder_features, dataset);
    let mut table: Vec<Vec<f64>> = match mode {
        EncoderMode::Tied => vec![pooled_local.clone(); dataset.len()],
        EncoderMode::PerDatapoint => dataset
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let own = ConstraintSet::moments_of(encoder_features, x);
                if problem.point_loss(i, &a, &own).is_ok() {
                    own
                } else {
                    pooled_local.clone()
                }
            })
            .collect(),
    };
    let mut loss = problem
        .joint_loss(&a, &table)
        .map_err(|e| Error::InfeasibleStep(format!("initial abstraction is infeasible: {e}")))?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        loss,
        step: 0.0,
    }];

    let mut converged = false;
    for sweep in 1..=MAX_SWEEPS {
        let before = loss;
        if !a.is_empty() {
            let m = minimize(|x: &[f64]| problem.joint_loss(x, &table), &a, cfg)?;
            a = m.x;
        }
        if !encoder_features.is_empty() {
            match mode {
                EncoderMode::PerDatapoint => {
                    for i in 0..dataset.len() {
                        let m = minimize(|x: &[f64]| problem.point_loss(i, &a, x), &table[i], cfg)?;
                        table[i] = m.x;
                    }
                }
                EncoderMode::Tied => {
                    let tied = |x: &[f64]| {
                        let t = vec![x.to_vec(); dataset.len()];
                        problem.joint_loss(&a, &t)
                    };
                    let m = minimize(tied, &table[0], cfg)?;
                    table = vec![m.x; dataset.len()];
                }
            }
        }
        loss = problem.joint_loss(&a, &table)?;
        trace.push(TraceEntry {
            iteration: sweep,
            loss,
            step: 1.0,
        });
        if before - loss <= cfg.tolerance * (1.0 + before.abs()) {
            converged = true;
            break;
        }
    }

    Ok(EncoderFit {
        shared: AbstractionModel {
            features: shared_features.to_vec(),
            targets: a,
        },
        encoder: EncoderAbstraction {
            features: encoder_features.to_vec(),
            table,
        },
        loss,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::targets::learn_targets_dataset;
    use crate::query::Query;

    fn dataset() -> Vec<DiscreteDistribution> {
        vec![
            DiscreteDistribution::new(vec![0.5, 0.2, 0.2, 0.1]).unwrap(),
            DiscreteDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            DiscreteDistribution::new(vec![0.25, 0.25, 0.4, 0.1]).unwrap(),
        ]
    }

    fn shared() -> Vec<FeatureFunction> {
        vec![FeatureFunction::new("energy", vec![0.0, 1.0, 2.0, 3.0]).unwrap()]
    }

    fn local() -> Vec<FeatureFunction> {
        vec![FeatureFunction::new("left_half", vec![1.0, 1.0, 0.0, 0.0]).unwrap()]
    }

    #[test]
    fn encoder_capacity_answers_coarse_grain() {
        let qs = QuerySet::single(Query::coarse_grain("halves", vec![0, 0, 1, 1]).unwrap());
        let fit = learn_encoder(
            &dataset(),
            &shared(),
            &local(),
            &qs,
            DivergenceSpec::Kl,
            EncoderMode::PerDatapoint,
            &LearningConfig::default(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(fit.loss < 1e-6, "{}", fit.loss);
        assert!(fit.trace.windows(2).all(|w| w[1].loss <= w[0].loss + 1e-9));
    }

    #[test]
    fn tied_encoder_matches_shared_learner() {
        let qs = QuerySet::single(Query::reconstruction("r", 4).unwrap());
        let cfg = LearningConfig::default();
        let opts = SolverOptions::default();
        let tied = learn_encoder(&dataset(), &shared(), &local(), &qs, DivergenceSpec::Kl, EncoderMode::Tied, &cfg, &opts)
            .unwrap();
        let concat: Vec<FeatureFunction> = shared().into_iter().chain(local()).collect();
        let flat = learn_targets_dataset(&dataset(), &concat, &qs, DivergenceSpec::Kl, &cfg, &opts).unwrap();
        assert!((tied.loss - flat.loss).abs() < 1e-8, "{} vs {}", tied.loss, flat.loss);
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let qs = QuerySet::single(Query::reconstruction("r", 4).unwrap());
        let err = learn_encoder(
            &dataset(),
            &shared(),
            &shared(),
            &qs,
            DivergenceSpec::Kl,
            EncoderMode::PerDatapoint,
            &LearningConfig::default(),
            &SolverOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
