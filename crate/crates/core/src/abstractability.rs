//! Universal abstractability: the entropy of the lowest-entropy Gaussian
//! mixture weight vector that reproduces a gridded density within tolerance.
//!
//! The search runs over a fixed portfolio of candidate mixtures built without
//! reference to the tolerance, so loosening the tolerance can only admit more
//! candidates. The portfolio always contains the trivial solution with one
//! point mass per occupied grid point, which fits exactly and has weight
//! entropy `H[p]`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::LearningConfig;
use crate::maxent::log_sum_exp;
use crate::query::kl_divergence;
use crate::space::{entropy, DiscreteDistribution, Grid, StateSpace};

/// Random restarts per component count, on top of the quantile start.
pub const RANDOM_STARTS: usize = 3;
/// Components lighter than this are dropped by the pruning pass.
pub const PRUNE_WEIGHT: f64 = 1e-3;
/// Weight entropies closer than this are considered tied.
const ENTROPY_TIE: f64 = 1e-12;
const EM_TOLERANCE: f64 = 1e-12;

/// A normalized density tabulated on a one-dimensional grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTarget", into = "RawTarget")]
pub struct TargetDensity {
    pub grid: StateSpace,
    pub weights: DiscreteDistribution,
}

#[derive(Serialize, Deserialize)]
struct RawTarget {
    coordinates: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
}

impl TryFrom<RawTarget> for TargetDensity {
    type Error = Error;
    fn try_from(raw: RawTarget) -> Result<Self> {
        TargetDensity::from_masses(raw.coordinates, raw.weights, raw.spacing)
    }
}

impl From<TargetDensity> for RawTarget {
    fn from(t: TargetDensity) -> Self {
        let grid = t.grid.grid().expect("target grids carry coordinates").clone();
        RawTarget {
            coordinates: grid.coordinates,
            weights: t.weights.weights().to_vec(),
            spacing: Some(grid.spacing),
        }
    }
}

impl TargetDensity {
    pub fn new(grid: StateSpace, weights: DiscreteDistribution) -> Result<Self> {
        let coords = grid
            .coordinates()
            .ok_or_else(|| Error::invalid("target density needs a gridded state space"))?;
        if coords.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid coordinates must be strictly increasing"));
        }
        weights.ensure_len(coords.len())?;
        Ok(TargetDensity { grid, weights })
    }

    /// Normalizes non-negative masses on the given coordinates. Spacing
    /// defaults to the smallest gap between neighbours.
    pub fn from_masses(coordinates: Vec<f64>, masses: Vec<f64>, spacing: Option<f64>) -> Result<Self> {
        if coordinates.len() != masses.len() {
            return Err(Error::invalid("one weight per coordinate"));
        }
        let spacing = match spacing {
            Some(s) => s,
            None => coordinates
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        };
        let spacing = if spacing.is_finite() { spacing } else { 1.0 };
        let states = (0..coordinates.len()).map(|i| format!("g{i}")).collect();
        let grid = StateSpace::with_grid(states, Grid { coordinates, spacing })?;
        TargetDensity::new(grid, DiscreteDistribution::from_unnormalized(masses)?)
    }

    /// Tabulates `density(x)` on `grid` and normalizes.
    pub fn from_fn(grid: StateSpace, density: impl Fn(f64) -> f64) -> Result<Self> {
        let coords = grid
            .coordinates()
            .ok_or_else(|| Error::invalid("target density needs a gridded state space"))?;
        let masses = coords.iter().map(|&x| density(x)).collect();
        TargetDensity::new(grid, DiscreteDistribution::from_unnormalized(masses)?)
    }

    /// Two columns `coordinate,weight`; a non-numeric first line is a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut coords = Vec::new();
        let mut masses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match cols.as_slice() {
                [x, w] => x.parse::<f64>().ok().zip(w.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some((x, w)) => {
                    coords.push(x);
                    masses.push(w);
                }
                None if i == 0 => continue,
                None => return Err(Error::invalid(format!("line {}: expected `coordinate,weight`", i + 1))),
            }
        }
        TargetDensity::from_masses(coords, masses, None)
    }

    /// Gaussian components `(weight, mean, sd)` tabulated on `grid`.
    pub fn gaussian_mixture(grid: StateSpace, components: &[(f64, f64, f64)]) -> Result<Self> {
        TargetDensity::from_fn(grid, |x| {
            components
                .iter()
                .map(|&(w, mu, sd)| w * (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / sd)
                .sum()
        })
    }

    pub fn coordinates(&self) -> &[f64] {
        self.grid.coordinates().expect("validated on construction")
    }

    pub fn spacing(&self) -> f64 {
        self.grid.grid().expect("validated on construction").spacing
    }

    pub fn entropy(&self) -> f64 {
        self.weights.entropy()
    }
}

/// One mixture component. `sigma = 0` is a point mass at the grid coordinate
/// nearest to `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub components: Vec<Component>,
}

fn nearest(coords: &[f64], x: f64) -> usize {
    let i = coords.partition_point(|&c| c < x);
    if i == 0 {
        0
    } else if i == coords.len() || x - coords[i - 1] <= coords[i] - x {
        i - 1
    } else {
        i
    }
}

/// Grid masses of a single component, normalized on the grid.
fn component_masses(coords: &[f64], mean: f64, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        let mut out = vec![0.0; coords.len()];
        out[nearest(coords, mean)] = 1.0;
        return out;
    }
    let logs: Vec<f64> = coords.iter().map(|&x| -(x - mean).powi(2) / (2.0 * sigma * sigma)).collect();
    let lse = log_sum_exp(logs.iter().copied());
    logs.iter().map(|l| (l - lse).exp()).collect()
}

impl MixtureModel {
    /// Mixture masses on the grid (component weights renormalized).
    pub fn grid_masses(&self, coords: &[f64]) -> Vec<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut out = vec![0.0; coords.len()];
        for c in &self.components {
            if c.weight <= 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(component_masses(coords, c.mean, c.sigma)) {
                *o += c.weight / total * m;
            }
        }
        out
    }

    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components.iter().map(|c| c.weight / total).collect()
    }

    /// `H[π]` in nats.
    pub fn weight_entropy(&self) -> f64 {
        entropy(&self.weights())
    }

    pub fn active_components(&self) -> usize {
        self.components.iter().filter(|c| c.weight > 0.0).count()
    }

    /// `KL(target ‖ mixture)` on the grid; infinite when the mixture misses
    /// occupied grid points.
    pub fn fit_error(&self, target: &TargetDensity) -> f64 {
        let q = self.grid_masses(target.coordinates());
        kl_divergence(target.weights.weights(), &q).unwrap_or(f64::INFINITY)
    }

    fn normalized(mut self) -> Self {
        self.components.retain(|c| c.weight > 0.0);
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        for c in &mut self.components {
            c.weight /= total;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractabilityReport {
    /// `𝒜 = H[π]` in nats.
    pub score: f64,
    pub mixture: MixtureModel,
    pub fit_error: f64,
    /// `H[p]`, the trivial-solution upper bound.
    pub entropy_bound: f64,
    pub candidates_examined: usize,
}

/// One point mass per occupied grid point with `π = p`.
pub fn trivial_mixture(target: &TargetDensity) -> MixtureModel {
    MixtureModel {
        components: target
            .coordinates()
            .iter()
            .zip(target.weights.weights())
            .filter(|(_, &p)| p > 0.0)
            .map(|(&x, &p)| Component {
                weight: p,
                mean: x,
                sigma: 0.0,
            })
            .collect(),
    }
}

/// Weighted EM over Gaussian components on the grid, with `σ ≥ floor`.
fn em(target: &TargetDensity, init: Vec<Component>, floor: f64, max_iters: usize) -> MixtureModel {
    let coords = target.coordinates();
    let p = target.weights.weights();
    let mut comps = init;
    for _ in 0..max_iters {
        let masses: Vec<Vec<f64>> = comps.iter().map(|c| component_masses(coords, c.mean, c.sigma)).collect();
        let k = comps.len();
        let mut n_k = vec![0.0; k];
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k];
        for (x, (&xc, &px)) in coords.iter().zip(p).enumerate() {
            if px == 0.0 {
                continue;
            }
            let mix: f64 = (0..k).map(|i| comps[i].weight * masses[i][x]).sum();
            for i in 0..k {
                let r = if mix > 0.0 {
                    comps[i].weight * masses[i][x] / mix
                } else {
                    1.0 / k as f64
                };
                let w = px * r;
                n_k[i] += w;
                s1[i] += w * xc;
            }
        }
        let means: Vec<f64> = (0..k).map(|i| if n_k[i] > 0.0 { s1[i] / n_k[i] } else { comps[i].mean }).collect();
        for (x, (&xc, &px)) in coords.iter().zip(p).enumerate() {
            if px == 0.0 {
                continue;
            }
            let mix: f64 = (0..k).map(|i| comps[i].weight * masses[i][x]).sum();
            for i in 0..k {
                let r = if mix > 0.0 {
                    comps[i].weight * masses[i][x] / mix
                } else {
                    1.0 / k as f64
                };
                s2[i] += px * r * (xc - means[i]).powi(2);
            }
        }
        let mut change: f64 = 0.0;
        let mut next = Vec::with_capacity(k);
        for i in 0..k {
            if n_k[i] <= 1e-14 {
                change = f64::INFINITY;
                continue;
            }
            let sigma = (s2[i] / n_k[i]).sqrt().max(floor);
            let c = Component {
                weight: n_k[i],
                mean: means[i],
                sigma,
            };
            change = change
                .max((c.weight - comps[i].weight).abs())
                .max((c.mean - comps[i].mean).abs())
                .max((c.sigma - comps[i].sigma).abs());
            next.push(c);
        }
        comps = next;
        if change < EM_TOLERANCE {
            break;
        }
    }
    MixtureModel { components: comps }.normalized()
}

/// Components at the σ floor become point masses on the nearest grid point.
fn snap_deltas(m: &MixtureModel, target: &TargetDensity, floor: f64) -> Option<MixtureModel> {
    let coords = target.coordinates();
    let mut changed = false;
    let components = m
        .components
        .iter()
        .map(|c| {
            if c.sigma > 0.0 && c.sigma <= floor * (1.0 + 1e-9) {
                changed = true;
                Component {
                    weight: c.weight,
                    mean: coords[nearest(coords, c.mean)],
                    sigma: 0.0,
                }
            } else {
                *c
            }
        })
        .collect();
    changed.then_some(MixtureModel { components })
}

fn merge_closest(m: &MixtureModel, floor: f64) -> Option<Vec<Component>> {
    let c = &m.components;
    if c.len() < 2 {
        return None;
    }
    let mut best = (f64::INFINITY, 0, 1);
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let d = (c[i].mean - c[j].mean).abs() / (c[i].sigma + c[j].sigma).max(floor);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    let (_, i, j) = best;
    let w = c[i].weight + c[j].weight;
    let mean = (c[i].weight * c[i].mean + c[j].weight * c[j].mean) / w;
    let second = (c[i].weight * (c[i].sigma.powi(2) + c[i].mean.powi(2))
        + c[j].weight * (c[j].sigma.powi(2) + c[j].mean.powi(2)))
        / w
        - mean * mean;
    let mut out: Vec<Component> = c
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .map(|(_, c)| *c)
        .collect();
    out.push(Component {
        weight: w,
        mean,
        sigma: second.max(0.0).sqrt().max(floor),
    });
    Some(out)
}

fn quantile_start(target: &TargetDensity, k: usize, floor: f64) -> Vec<Component> {
    let coords = target.coordinates();
    let p = target.weights.weights();
    let mean = target.weights.expectation(coords);
    let sd = coords.iter().zip(p).map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>().sqrt();
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for w in p {
        acc += w;
        cdf.push(acc);
    }
    (0..k)
        .map(|i| {
            let q = (i as f64 + 0.5) / k as f64;
            let idx = cdf.partition_point(|&c| c < q).min(coords.len() - 1);
            Component {
                weight: 1.0 / k as f64,
                mean: coords[idx],
                sigma: (sd / k as f64).max(floor),
            }
        })
        .collect()
}

fn random_start(target: &TargetDensity, k: usize, floor: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Component>> {
    let coords = target.coordinates();
    let index = WeightedIndex::new(target.weights.weights()).map_err(|e| Error::invalid(e.to_string()))?;
    let mean = target.weights.expectation(coords);
    let sd = target
        .weights
        .weights()
        .iter()
        .zip(coords)
        .map(|(w, x)| w * (x - mean).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((0..k)
        .map(|_| Component {
            weight: 1.0 / k as f64,
            mean: coords[index.sample(rng)],
            sigma: (sd / k as f64).max(floor),
        })
        .collect())
}

/// The full candidate portfolio; independent of any tolerance.
pub fn candidate_portfolio(target: &TargetDensity, max_components: usize, cfg: &LearningConfig) -> Result<Vec<MixtureModel>> {
    if max_components == 0 {
        return Err(Error::invalid("need at least one mixture component"));
    }
    cfg.validate()?;
    let floor = 0.5 * target.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![trivial_mixture(target)];
    let push = |m: MixtureModel, out: &mut Vec<MixtureModel>| {
        if let Some(s) = snap_deltas(&m, target, floor) {
            out.push(s);
        }
        let pruned = MixtureModel {
            components: m.components.iter().filter(|c| c.weight >= PRUNE_WEIGHT).copied().collect(),
        };
        if !pruned.components.is_empty() && pruned.components.len() < m.components.len() {
            out.push(pruned.normalized());
        }
        out.push(m);
    };
    for k in 1..=max_components {
        let mut starts = vec![quantile_start(target, k, floor)];
        for _ in 0..RANDOM_STARTS {
            starts.push(random_start(target, k, floor, &mut rng)?);
        }
        let fits: Vec<MixtureModel> = starts.into_iter().map(|s| em(target, s, floor, cfg.max_iters)).collect();
        let best = fits
            .iter()
            .min_by(|a, b| a.fit_error(target).total_cmp(&b.fit_error(target)))
            .cloned()
            .expect("at least one start");
        for f in fits {
            push(f, &mut out);
        }
        // greedy merge chain from the best fit
        let mut current = best;
        while let Some(merged) = merge_closest(&current, floor) {
            current = em(target, merged, floor, cfg.max_iters);
            push(current.clone(), &mut out);
        }
    }
    Ok(out)
}

/// Lowest-`H[π]` candidate with `KL(target ‖ mixture) ≤ eps`; ties go to fewer
/// active components, then lower fit error.
pub fn fit_min_entropy_mixture(
    target: &TargetDensity,
    max_components: usize,
    eps: f64,
    cfg: &LearningConfig,
) -> Result<MixtureModel> {
    Ok(abstractability_score(target, max_components, eps, cfg)?.mixture)
}

pub fn abstractability_score(
    target: &TargetDensity,
    max_components: usize,
    eps: f64,
    cfg: &LearningConfig,
) -> Result<AbstractabilityReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let portfolio = candidate_portfolio(target, max_components, cfg)?;
    let candidates_examined = portfolio.len();
    let mut best: Option<(f64, usize, f64, MixtureModel)> = None;
    for m in portfolio {
        let err = m.fit_error(target);
        if !(err <= eps) {
            continue;
        }
        let key = (m.weight_entropy(), m.active_components(), err);
        let better = match &best {
            None => true,
            Some((h, n, e, _)) => {
                if key.0 < h - ENTROPY_TIE {
                    true
                } else if key.0 <= h + ENTROPY_TIE {
                    key.1 < *n || (key.1 == *n && key.2 < *e)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((key.0, key.1, key.2, m));
        }
    }
    let (score, _, fit_error, mixture) = best.ok_or(Error::ToleranceUnreachable { eps })?;
    let entropy_bound = target.entropy();
    debug_assert!(score <= entropy_bound + 1e-9);
    Ok(AbstractabilityReport {
        score,
        mixture,
        fit_error,
        entropy_bound,
        candidates_examined,
    })
}
