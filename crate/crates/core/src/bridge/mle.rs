//! Reconstruction-loss minimization versus likelihood maximization.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{fd_gradient, learn_targets_from, LearningConfig};
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{kl_divergence, DivergenceSpec, Query, QuerySet};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction, StateSpace};

/// Samples as state indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_states: usize,
    pub samples: Vec<usize>,
}

impl Dataset {
    pub fn new(n_states: usize, samples: Vec<usize>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("dataset must be non-empty"));
        }
        if let Some(&bad) = samples.iter().find(|&&s| s >= n_states) {
            return Err(Error::invalid(format!("sample {bad} outside a space of {n_states} states")));
        }
        Ok(Dataset { n_states, samples })
    }

    pub fn from_labels(space: &StateSpace, labels: &[String]) -> Result<Self> {
        let samples = labels
            .iter()
            .map(|l| {
                space
                    .states()
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| Error::invalid(format!("unknown state `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(space.len(), samples)
    }

    /// `count` i.i.d. draws from `dist`, reproducible from `seed`.
    pub fn sample(dist: &DiscreteDistribution, count: usize, seed: u64) -> Result<Self> {
        let index = WeightedIndex::new(dist.weights()).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..count).map(|_| index.sample(&mut rng)).collect();
        Dataset::new(dist.len(), samples)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_states];
        for &s in &self.samples {
            c[s] += 1;
        }
        c
    }

    /// The delta mixture `(1/N) Σ δ(x − x_i)`.
    pub fn empirical(&self) -> DiscreteDistribution {
        let n = self.samples.len() as f64;
        DiscreteDistribution::from_unnormalized(self.counts().iter().map(|&c| c as f64 / n).collect())
            .expect("non-empty dataset")
    }
}

/// Prior over abstraction targets, supported on a finite candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// All mass on `atom`; every other target has log-prior −∞.
    Delta { atom: Vec<f64> },
    Uniform { candidates: Vec<Vec<f64>> },
    Table { candidates: Vec<Vec<f64>>, log_prior: Vec<f64> },
}

impl PriorSpec {
    /// Candidates with finite log-prior.
    pub fn support(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        let out: Vec<(Vec<f64>, f64)> = match self {
            PriorSpec::Delta { atom } => vec![(atom.clone(), 0.0)],
            PriorSpec::Uniform { candidates } => {
                let lp = -(candidates.len() as f64).ln();
                candidates.iter().map(|c| (c.clone(), lp)).collect()
            }
            PriorSpec::Table { candidates, log_prior } => {
                if candidates.len() != log_prior.len() {
                    return Err(Error::invalid("one log-prior value per candidate"));
                }
                if log_prior.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("log-prior values must be finite"));
                }
                candidates.iter().cloned().zip(log_prior.iter().copied()).collect()
            }
        };
        if out.is_empty() {
            return Err(Error::invalid("prior needs at least one candidate"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleMapReport {
    pub argmin_loss_targets: Vec<f64>,
    pub argmax_likelihood_targets: Vec<f64>,
    /// Max-norm distance between the two.
    pub gap: f64,
    /// With a prior: the likelihood-only argmax over the same candidates.
    pub prior_free_targets: Option<Vec<f64>>,
}

/// `Σ_i ln m(a)(x_i)`, or `None` when `a` is infeasible.
fn log_likelihood(
    counts: &[usize],
    features: &[FeatureFunction],
    a: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    let c = ConstraintSet::new(features.to_vec(), a.to_vec())?;
    let m = solve_maxent_on(counts.len(), &c, opts)?;
    Ok(counts
        .iter()
        .zip(m.distribution.weights())
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &p)| k as f64 * p.ln())
        .sum())
}

/// Damped Newton ascent on the log-likelihood with finite-difference
/// derivatives. Infeasible trial points are backtracked.
fn maximize_likelihood(
    counts: &[usize],
    features: &[FeatureFunction],
    init: &[f64],
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let d = init.len();
    let n: f64 = counts.iter().sum::<usize>() as f64;
    let mut neg = |a: &[f64]| -> Result<f64> { Ok(-log_likelihood(counts, features, a, opts)? / n) };
    let mut a = init.to_vec();
    let mut value = neg(&a)?;
    let h = cfg.fd_step;
    for _ in 0..cfg.max_iters {
        let g = fd_gradient(&mut neg, &a, h)?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < cfg.tolerance {
            return Ok(a);
        }
        let mut hess = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut up = a.clone();
            let mut down = a.clone();
            up[j] += h;
            down[j] -= h;
            let (gu, gd) = match (fd_gradient(&mut neg, &up, h), fd_gradient(&mut neg, &down, h)) {
                (Ok(gu), Ok(gd)) => (gu, gd),
                _ => (g.clone(), g.clone()),
            };
            for i in 0..d {
                hess[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let gv = DVector::from_vec(g.clone());
        let dir = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&gv)),
            None => -&gv,
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = a.iter().zip(dir.iter()).map(|(x, s)| x + t * s).collect();
            if let Ok(v) = neg(&trial) {
                if v <= value {
                    a = trial;
                    value = v;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return Ok(a);
        }
    }
    Err(Error::LearnerNonConvergence {
        iterations: cfg.max_iters,
        gradient_norm: f64::NAN,
        trace: Vec::new(),
    })
}

/// Compares the reconstruction-loss argmin with the likelihood argmax. With
/// a prior both searches run over the prior's support, the loss route
/// minimizing `N·loss − ln p(a)` and the likelihood route maximizing
/// `Σ ln p(x_i|a) + ln p(a)`.
pub fn mle_map_reduction_check(
    dataset: &Dataset,
    features: &[FeatureFunction],
    prior: Option<&PriorSpec>,
    cfg: &LearningConfig,
    opts: &SolverOptions,
) -> Result<MleMapReport> {
    let empirical = dataset.empirical();
    let counts = dataset.counts();
    let n = dataset.samples.len() as f64;

    let (loss_route, lik_route, prior_free) = match prior {
        None => {
            let start = ConstraintSet::moments_of(features, &DiscreteDistribution::uniform(dataset.n_states)?);
            let qs = QuerySet::single(Query::reconstruction("reconstruction", dataset.n_states)?);
            let fit = learn_targets_from(
                std::slice::from_ref(&empirical),
                features,
                &start,
                &qs,
                DivergenceSpec::Kl,
                cfg,
                opts,
            )?;
            let lik = maximize_likelihood(&counts, features, &start, cfg, opts)?;
            (fit.model.targets, lik, None)
        }
        Some(p) => {
            let support = p.support()?;
            let mut best_loss: Option<(f64, &Vec<f64>)> = None;
            let mut best_post: Option<(f64, &Vec<f64>)> = None;
            let mut best_lik: Option<(f64, &Vec<f64>)> = None;
            for (a, lp) in &support {
                let c = ConstraintSet::new(features.to_vec(), a.clone())?;
                let model = solve_maxent_on(dataset.n_states, &c, opts)?;
                let loss = kl_divergence(empirical.weights(), model.distribution.weights()).unwrap_or(f64::INFINITY);
                let penalized = n * loss - lp;
                let lik = log_likelihood(&counts, features, a, opts)?;
                if best_loss.is_none_or(|(v, _)| penalized < v) {
                    best_loss = Some((penalized, a));
                }
                if best_post.is_none_or(|(v, _)| lik + lp > v) {
                    best_post = Some((lik + lp, a));
                }
                if best_lik.is_none_or(|(v, _)| lik > v) {
                    best_lik = Some((lik, a));
                }
            }
            let pick = |b: Option<(f64, &Vec<f64>)>| b.map(|(_, a)| a.clone()).expect("non-empty support");
            (pick(best_loss), pick(best_post), Some(pick(best_lik)))
        }
    };
    let gap = loss_route
        .iter()
        .zip(&lik_route)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MleMapReport {
        argmin_loss_targets: loss_route,
        argmax_likelihood_targets: lik_route,
        gap,
        prior_free_targets: prior_free,
    })
}
