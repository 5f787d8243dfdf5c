//! Maximum-entropy distributions over finite state spaces.
//!
//! The primal problem `max H[p] s.t. E_p[f_i] = c_i` is solved through its
//! convex dual `min_λ ln Z(λ) + λ·c` with `Z(λ) = Σ_x exp(-λ·f(x))`. The dual
//! gradient is `c - E_p[f]` and its Hessian is the feature covariance under
//! `p`, so damped Newton with an Armijo backtracking search converges in a
//! handful of steps at the sizes this crate targets.
//!
//! Targets that sit exactly on the edge of a feature's range cannot be met by
//! any finite multiplier. Those are handled by restricting the support to the
//! face of states attaining the bound (the multiplier is reported as ±∞) and
//! solving the remaining constraints there.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Max absolute constraint residual accepted at exit.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Recorded for reproducibility; the Newton solve itself is deterministic.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntSolution {
    /// One per constraint. `±inf` marks a target pinned to a range bound.
    pub multipliers: Vec<f64>,
    /// `ln Z = λ_0 - 1` over the support of the solution.
    pub log_partition: f64,
    pub distribution: DiscreteDistribution,
    /// Nats, for the counting measure on the states.
    pub entropy: f64,
    /// `|E_p[f_i] - c_i|` per constraint.
    pub residuals: Vec<f64>,
}

impl MaxEntSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    fn assemble(
        features: &[&[f64]],
        targets: &[f64],
        multipliers: Vec<f64>,
        log_partition: f64,
        distribution: DiscreteDistribution,
    ) -> Self {
        let residuals = features
            .iter()
            .zip(targets)
            .map(|(f, c)| (distribution.expectation(f) - c).abs())
            .collect();
        MaxEntSolution {
            multipliers,
            log_partition,
            entropy: distribution.entropy(),
            distribution,
            residuals,
        }
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_x exp(-Σ_i λ_i f_i(x))`.
pub fn log_partition(features: &[FeatureFunction], multipliers: &[f64]) -> f64 {
    let n = features.first().map_or(0, |f| f.len());
    log_sum_exp((0..n).map(|x| {
        -features
            .iter()
            .zip(multipliers)
            .map(|(f, l)| l * f.values[x])
            .sum::<f64>()
    }))
}

/// Dual objective `ln Z(λ) + λ·c`, convex in `λ`.
pub fn dual_objective(constraints: &ConstraintSet, multipliers: &[f64]) -> f64 {
    log_partition(&constraints.features, multipliers)
        + multipliers
            .iter()
            .zip(&constraints.targets)
            .map(|(l, c)| l * c)
            .sum::<f64>()
}

/// The exponential-family member `p ∝ exp(-λ·f)` for given multipliers.
pub fn gibbs_distribution(
    features: &[FeatureFunction],
    multipliers: &[f64],
    n_states: usize,
) -> Result<DiscreteDistribution> {
    let logw: Vec<f64> = (0..n_states)
        .map(|x| {
            -features
                .iter()
                .zip(multipliers)
                .map(|(f, l)| l * f.values[x])
                .sum::<f64>()
        })
        .collect();
    DiscreteDistribution::from_log_weights(&logw)
}

pub fn solve_maxent(
    space: &StateSpace,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<MaxEntSolution> {
    solve_maxent_on(space.len(), constraints, opts)
}

/// Same as [`solve_maxent`] but keyed on the state count only.
pub fn solve_maxent_on(
    n_states: usize,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<MaxEntSolution> {
    if n_states == 0 {
        return Err(Error::invalid("state space must be non-empty"));
    }
    if !(opts.tolerance > 0.0) || opts.max_iters == 0 {
        return Err(Error::invalid("solver needs tolerance > 0 and max_iters > 0"));
    }
    constraints.validate(n_states)?;

    let m = constraints.len();
    let mut multipliers = vec![0.0; m];
    let mut support: Vec<usize> = (0..n_states).collect();
    let mut active: Vec<usize> = (0..m).collect();
    let mut restricted = false;

    // Peel off constraints pinned to a face of the current support.
    loop {
        let mut changed = false;
        let mut next_active = Vec::with_capacity(active.len());
        for &i in &active {
            let f = &constraints.features[i].values;
            let c = constraints.targets[i];
            let (lo, hi) = support
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(f[x]), hi.max(f[x]))
                });
            let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if c < lo - tol || c > hi + tol {
                let feature = constraints.features[i].name.clone();
                return Err(if restricted {
                    Error::DegenerateBoundary { feature }
                } else {
                    Error::InfeasibleConstraints {
                        feature,
                        target: c,
                        min: lo,
                        max: hi,
                    }
                });
            }
            if hi - lo <= tol {
                // constant on the support and already satisfied
                changed = true;
                continue;
            }
            if (c - lo).abs() <= tol {
                support.retain(|&x| f[x] <= lo + tol);
                multipliers[i] = f64::INFINITY;
                restricted = true;
                changed = true;
            } else if (c - hi).abs() <= tol {
                support.retain(|&x| f[x] >= hi - tol);
                multipliers[i] = f64::NEG_INFINITY;
                restricted = true;
                changed = true;
            } else {
                next_active.push(i);
            }
        }
        active = next_active;
        if !changed {
            break;
        }
    }

    // Centered features on the support: g_i(x) = f_i(x) - c_i.
    let centered: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| {
            let f = &constraints.features[i].values;
            let c = constraints.targets[i];
            support.iter().map(|&x| f[x] - c).collect()
        })
        .collect();
    let base = vec![0.0; support.len()];
    let outcome = newton_dual(&centered, &base, 0.0, opts)?;
    for (k, &i) in active.iter().enumerate() {
        multipliers[i] = outcome.multipliers[k];
    }

    let mut weights = vec![0.0; n_states];
    for (k, &x) in support.iter().enumerate() {
        weights[x] = outcome.weights[k];
    }
    let distribution = DiscreteDistribution::from_unnormalized(weights)?;

    // ln Z in the uncentered parametrization, over the support.
    let log_z = log_sum_exp(support.iter().map(|&x| {
        -active
            .iter()
            .map(|&i| multipliers[i] * constraints.features[i].values[x])
            .sum::<f64>()
    }));

    let feats: Vec<&[f64]> = constraints.features.iter().map(|f| f.values.as_slice()).collect();
    let sol = MaxEntSolution::assemble(&feats, &constraints.targets, multipliers, log_z, distribution);
    if sol.max_residual() >= opts.tolerance {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            max_residual: sol.max_residual(),
            residuals: sol.residuals,
        });
    }
    Ok(sol)
}

struct DualOutcome {
    multipliers: Vec<f64>,
    weights: Vec<f64>,
    iterations: usize,
}

/// Minimizes `ln Σ_x exp(b(x) - λ·g(x)) + (penalty / 2)·|λ|²` by damped Newton.
///
/// `g` holds centered features (rows), `b` the log base measure. With
/// `penalty = 0` this is the hard-constraint dual, whose gradient is `-E[g]`.
fn newton_dual(
    g: &[Vec<f64>],
    base: &[f64],
    penalty: f64,
    opts: &SolverOptions,
) -> Result<DualOutcome> {
    let k = g.len();
    let s = base.len();
    let mut lambda = DVector::<f64>::zeros(k);

    let eval = |lambda: &DVector<f64>| -> (f64, Vec<f64>) {
        let logw: Vec<f64> = (0..s)
            .map(|x| base[x] - (0..k).map(|i| lambda[i] * g[i][x]).sum::<f64>())
            .collect();
        let lse = log_sum_exp(logw.iter().copied());
        let p: Vec<f64> = logw.iter().map(|l| (l - lse).exp()).collect();
        (lse + 0.5 * penalty * lambda.norm_squared(), p)
    };

    let (mut value, mut p) = eval(&lambda);
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let mean = DVector::from_iterator(k, (0..k).map(|i| (0..s).map(|x| p[x] * g[i][x]).sum()));
        let grad = &lambda * penalty - &mean;
        let stop = if penalty == 0.0 {
            mean.amax()
        } else {
            grad.amax()
        };
        if stop < opts.tolerance * 1e-2 || k == 0 {
            break;
        }
        iterations += 1;

        let mut hess = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let e: f64 = (0..s).map(|x| p[x] * g[i][x] * g[j][x]).sum();
                let c = e - mean[i] * mean[j];
                hess[(i, j)] = c;
                hess[(j, i)] = c;
            }
            hess[(i, i)] += penalty;
        }
        let direction = newton_direction(hess, &grad);
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        // Close to the optimum the decrease drops below the resolution of the
        // dual value; there a step is judged by the gradient it leaves behind.
        let noise = 8.0 * f64::EPSILON * (1.0 + value.abs());
        while step > 1e-14 {
            let trial = &lambda + &direction * step;
            let (tv, tp) = eval(&trial);
            let sufficient = tv <= value + 1e-4 * step * slope;
            let flat_but_closer = !sufficient && tv <= value + noise && {
                let g = (0..k).map(|i| {
                    let m: f64 = (0..s).map(|x| tp[x] * g[i][x]).sum();
                    (trial[i] * penalty - m).abs()
                });
                g.fold(0.0, f64::max) < grad.amax()
            };
            if sufficient || flat_but_closer {
                lambda = trial;
                value = tv;
                p = tp;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable decrease left
            break;
        }
    }
    Ok(DualOutcome {
        multipliers: lambda.iter().copied().collect(),
        weights: p,
        iterations,
    })
}

/// Minimum-norm solution of `H d = -grad`. Eigen-directions with
/// negligible curvature (collinear features) are left out.
fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let eig = hess.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    if !(top > 0.0) {
        return -grad.clone();
    }
    let cutoff = 1e-13 * top;
    let mut d = DVector::zeros(grad.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            let v = eig.eigenvectors.column(i);
            d -= v * (v.dot(grad) / ev);
        }
    }
    if d.iter().all(|v| v.is_finite()) && d.dot(grad) < 0.0 {
        d
    } else {
        -grad.clone()
    }
}

/// Result of the soft-constraint problem used to relate maxent to variational inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftMaxEntSolution {
    pub multipliers: Vec<f64>,
    pub distribution: DiscreteDistribution,
    /// `Σ q ln(q/r) + precision·Σ_i (c_i - E_q f_i)^2` at the optimum.
    pub free_energy: f64,
}

/// Minimizes `KL(q ‖ r) + precision·Σ_i (c_i - E_q[f_i])^2` over the simplex.
///
/// The minimizer is `q ∝ r·exp(-μ·f)` with `μ = 2·precision·(E_q f - c)`, found
/// from the strongly convex dual `ln Z(μ) + μ·c + |μ|²/(4·precision)`.
/// `reference = None` means the flat reference.
pub fn solve_soft_maxent(
    n_states: usize,
    constraints: &ConstraintSet,
    precision: f64,
    reference: Option<&DiscreteDistribution>,
    opts: &SolverOptions,
) -> Result<SoftMaxEntSolution> {
    if !(precision >= 0.0 && precision.is_finite()) {
        return Err(Error::invalid("precision must be finite and non-negative"));
    }
    constraints.validate(n_states)?;
    let base: Vec<f64> = match reference {
        Some(r) => {
            r.ensure_len(n_states)?;
            r.weights().iter().map(|w| w.ln()).collect()
        }
        None => vec![0.0; n_states],
    };
    let m = constraints.len();
    let (multipliers, distribution) = if precision == 0.0 || m == 0 {
        (vec![0.0; m], DiscreteDistribution::from_log_weights(&base)?)
    } else {
        let centered: Vec<Vec<f64>> = constraints
            .features
            .iter()
            .zip(&constraints.targets)
            .map(|(f, c)| f.values.iter().map(|v| v - c).collect())
            .collect();
        let outcome = newton_dual(&centered, &base, 1.0 / (2.0 * precision), opts)?;
        (
            outcome.multipliers,
            DiscreteDistribution::from_unnormalized(outcome.weights)?,
        )
    };
    let kl: f64 = distribution
        .weights()
        .iter()
        .zip(&base)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, b)| q * (q.ln() - b))
        .sum();
    let energy: f64 = constraints
        .features
        .iter()
        .zip(&constraints.targets)
        .map(|(f, c)| (c - distribution.expectation(&f.values)).powi(2))
        .sum();
    Ok(SoftMaxEntSolution {
        multipliers,
        free_energy: kl + precision * energy,
        distribution,
    })
}

/// Closed-form Boltzmann solution `p ∝ exp(-λ₁E)` with `λ₁` found by safeguarded
/// Newton on the (strictly decreasing) mean-energy map.
pub fn analytic_boltzmann(energies: &FeatureFunction, mean_energy: f64) -> Result<MaxEntSolution> {
    let (lo, hi) = (energies.min(), energies.max());
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if !(mean_energy > lo + tol && mean_energy < hi - tol) {
        return Err(Error::InfeasibleConstraints {
            feature: energies.name.clone(),
            target: mean_energy,
            min: lo,
            max: hi,
        });
    }
    let e = &energies.values;
    let moments = |lambda: f64| -> (f64, f64) {
        let shift = e.iter().map(|v| -lambda * v).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|v| (-lambda * v - shift).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean = w.iter().zip(e).map(|(w, v)| w * v).sum::<f64>() / z;
        let var = w.iter().zip(e).map(|(w, v)| w * (v - mean).powi(2)).sum::<f64>() / z;
        (mean, var)
    };

    // Bracket: mean(λ) decreases from max E (λ→-∞) to min E (λ→+∞).
    let (mut a, mut b) = (-1.0, 1.0);
    while moments(a).0 < mean_energy {
        a *= 2.0;
        if a < -1e6 {
            return Err(Error::invalid("mean energy too close to the upper bound"));
        }
    }
    while moments(b).0 > mean_energy {
        b *= 2.0;
        if b > 1e6 {
            return Err(Error::invalid("mean energy too close to the lower bound"));
        }
    }
    let mut lambda = 0.5 * (a + b);
    for _ in 0..200 {
        let (mean, var) = moments(lambda);
        let r = mean - mean_energy;
        if r.abs() <= 1e-15 * (1.0 + mean_energy.abs()) {
            break;
        }
        if r > 0.0 {
            a = lambda;
        } else {
            b = lambda;
        }
        let newton = lambda + r / var.max(1e-300);
        lambda = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a < 1e-15 * (1.0 + lambda.abs()) {
            break;
        }
    }
    let dist = gibbs_distribution(std::slice::from_ref(energies), &[lambda], e.len())?;
    let log_z = log_partition(std::slice::from_ref(energies), &[lambda]);
    Ok(MaxEntSolution::assemble(
        &[e.as_slice()],
        &[mean_energy],
        vec![lambda],
        log_z,
        dist,
    ))
}

/// The variance-constraint problem on a grid symmetric about its centre.
pub fn gaussian_constraints(variance: f64, grid: &StateSpace) -> Result<ConstraintSet> {
    let center = grid_center(grid)?;
    ConstraintSet::new(
        vec![FeatureFunction::squared_deviation(grid, center)?],
        vec![variance],
    )
}

fn grid_center(grid: &StateSpace) -> Result<f64> {
    let c = grid
        .coordinates()
        .ok_or_else(|| Error::invalid("gaussian family needs grid coordinates"))?;
    let n = c.len();
    let center = 0.5 * (c[0] + c[n - 1]);
    let scale = 1.0 + c[0].abs().max(c[n - 1].abs());
    for i in 0..n {
        if (c[i] + c[n - 1 - i] - 2.0 * center).abs() > 1e-9 * scale {
            return Err(Error::invalid("grid must be symmetric about its centre"));
        }
    }
    Ok(center)
}

/// Grid-discretized Gaussian with `λ₁ = 1/(2σ²)`, renormalized on the grid.
pub fn analytic_gaussian(variance: f64, grid: &StateSpace) -> Result<MaxEntSolution> {
    analytic_gaussian_with(variance, grid, |v| 1.0 / (2.0 * v))
}

/// As [`analytic_gaussian`] with the multiplier formula supplied by the caller.
/// Exists so verification harnesses can inject a faulty formula.
pub fn analytic_gaussian_with(
    variance: f64,
    grid: &StateSpace,
    multiplier_of: impl Fn(f64) -> f64,
) -> Result<MaxEntSolution> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid("variance must be positive"));
    }
    let center = grid_center(grid)?;
    let c = grid.coordinates().unwrap_or_default();
    let extent = 0.5 * (c[c.len() - 1] - c[0]);
    let required = 6.0 * variance.sqrt();
    if extent < required * (1.0 - 1e-9) {
        return Err(Error::GridTooNarrow { extent, required });
    }
    let lambda = multiplier_of(variance);
    let feature = FeatureFunction::squared_deviation(grid, center)?;
    let dist = gibbs_distribution(std::slice::from_ref(&feature), &[lambda], grid.len())?;
    let log_z = log_partition(std::slice::from_ref(&feature), &[lambda]);
    Ok(MaxEntSolution::assemble(
        &[feature.values.as_slice()],
        &[variance],
        vec![lambda],
        log_z,
        dist,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(values: &[f64]) -> FeatureFunction {
        FeatureFunction::new("energy", values.to_vec()).unwrap()
    }

    #[test]
    fn empty_constraints_give_uniform() {
        let space = StateSpace::indexed(4).unwrap();
        let sol = solve_maxent(&space, &ConstraintSet::empty(), &SolverOptions::default()).unwrap();
        for w in sol.distribution.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((sol.log_partition - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_target_gives_zero_multiplier() {
        let space = StateSpace::indexed(2).unwrap();
        let c = ConstraintSet::new(vec![energy(&[0.0, 1.0])], vec![0.5]).unwrap();
        let sol = solve_maxent(&space, &c, &SolverOptions::default()).unwrap();
        assert!(sol.multipliers[0].abs() < 1e-12);
        assert!((sol.distribution.weights()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_target_is_infeasible() {
        let space = StateSpace::indexed(2).unwrap();
        let c = ConstraintSet::new(vec![energy(&[0.0, 1.0])], vec![1.2]).unwrap();
        let err = solve_maxent(&space, &c, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleConstraints { .. }));
    }

    #[test]
    fn boundary_target_restricts_to_face() {
        // E = [0, 0, 1, 2] with target 0 forces uniform mass on the two ground states.
        let space = StateSpace::indexed(4).unwrap();
        let c = ConstraintSet::new(vec![energy(&[0.0, 0.0, 1.0, 2.0])], vec![0.0]).unwrap();
        let sol = solve_maxent(&space, &c, &SolverOptions::default()).unwrap();
        assert_eq!(sol.distribution.weights(), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(sol.multipliers[0], f64::INFINITY);
    }

    #[test]
    fn boundary_with_incompatible_second_constraint_is_degenerate() {
        // Face {s0, s1} has g = [0, 0], so g's target of 0.5 is unreachable there.
        let space = StateSpace::indexed(4).unwrap();
        let c = ConstraintSet::new(
            vec![energy(&[0.0, 0.0, 1.0, 2.0]), FeatureFunction::new("g", vec![0.0, 0.0, 1.0, 1.0]).unwrap()],
            vec![0.0, 0.5],
        )
        .unwrap();
        let err = solve_maxent(&space, &c, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateBoundary { .. }), "{err:?}");
    }

    #[test]
    fn jointly_infeasible_interior_targets_do_not_converge() {
        // f and g are identical, so E[f] = 0.2 and E[g] = 0.8 cannot both hold.
        let space = StateSpace::indexed(3).unwrap();
        let f = energy(&[0.0, 1.0, 2.0]);
        let mut g = f.clone();
        g.name = "copy".into();
        let c = ConstraintSet::new(vec![f, g], vec![0.2, 0.8]).unwrap();
        let opts = SolverOptions {
            max_iters: 50,
            ..Default::default()
        };
        let err = solve_maxent(&space, &c, &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
    }

    #[test]
    fn collinear_consistent_features_still_solve() {
        let space = StateSpace::indexed(3).unwrap();
        let f = energy(&[0.0, 1.0, 2.0]);
        let g = FeatureFunction::new("double", vec![0.0, 2.0, 4.0]).unwrap();
        let c = ConstraintSet::new(vec![f, g], vec![0.7, 1.4]).unwrap();
        let sol = solve_maxent(&space, &c, &SolverOptions::default()).unwrap();
        assert!(sol.max_residual() < 1e-10);
    }

    #[test]
    fn boltzmann_midpoint_is_uniform() {
        let sol = analytic_boltzmann(&energy(&[0.0, 1.0, 2.0]), 1.0).unwrap();
        assert!(sol.multipliers[0].abs() < 1e-12);
    }

    #[test]
    fn boltzmann_rejects_boundary() {
        let err = analytic_boltzmann(&energy(&[0.0, 1.0]), 0.0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleConstraints { .. }));
    }

    #[test]
    fn gaussian_multiplier_formula() {
        let grid = StateSpace::uniform_grid(-12.0, 12.0, 0.02).unwrap();
        let sol = analytic_gaussian(4.0, &grid).unwrap();
        assert_eq!(sol.multipliers[0], 0.125);
    }

    #[test]
    fn gaussian_rejects_narrow_grid() {
        let grid = StateSpace::uniform_grid(-3.0, 3.0, 0.01).unwrap();
        let err = analytic_gaussian(1.0, &grid).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow { .. }));
    }

    #[test]
    fn soft_problem_with_zero_precision_is_reference() {
        let c = ConstraintSet::new(vec![energy(&[0.0, 1.0, 2.0])], vec![0.4]).unwrap();
        let sol = solve_soft_maxent(3, &c, 0.0, None, &SolverOptions::default()).unwrap();
        for w in sol.distribution.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn soft_multiplier_matches_stationarity() {
        let f = energy(&[0.0, 1.0, 2.0]);
        let c = ConstraintSet::new(vec![f.clone()], vec![0.4]).unwrap();
        let precision = 3.0;
        let sol = solve_soft_maxent(3, &c, precision, None, &SolverOptions::default()).unwrap();
        let mean = sol.distribution.expectation(&f.values);
        assert!((sol.multipliers[0] - 2.0 * precision * (mean - 0.4)).abs() < 1e-9);
    }
}
