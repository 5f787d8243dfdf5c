use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by every learner in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Initial step scale (the starting inverse-Hessian is `step_size · I`).
    pub step_size: f64,
    pub max_iters: usize,
    /// Central-difference half-width.
    pub fd_step: f64,
    /// Stationarity threshold on the Euclidean norm of the FD gradient.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            step_size: 1.0,
            max_iters: 500,
            fd_step: 1e-4,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0
            && self.fd_step > 0.0
            && self.tolerance > 0.0
            && self.tolerance < 1.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "learning config needs positive step_size, fd_step, max_iters and 0 < tolerance < 1",
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: f64,
    /// Accepted line-search step (0 for the initial point).
    pub step: f64,
}

pub const TRACE_CSV_HEADER: &str = "iteration,loss,step";

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for e in trace {
        out.push_str(&format!("{},{:.16e},{:.16e}\n", e.iteration, e.loss, e.step));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// FD gradient norm fell below the tolerance.
    Stationary,
    /// No step along a descent direction lowers the loss in floating point.
    Stalled,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub loss: f64,
    pub gradient_norm: f64,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIters
    }
}

/// Central-difference gradient; falls back to a one-sided difference when one
/// side of the stencil is infeasible.
pub fn fd_gradient<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut fx: Option<f64> = None;
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe).ok();
        probe[i] = x[i] - h;
        let minus = f(&probe).ok();
        probe[i] = x[i];
        let g = match (plus, minus) {
            (Some(p), Some(m)) => (p - m) / (2.0 * h),
            (Some(p), None) => {
                let c = *fx.get_or_insert(f(x)?);
                (p - c) / h
            }
            (None, Some(m)) => {
                let c = *fx.get_or_insert(f(x)?);
                (c - m) / h
            }
            (None, None) => {
                return Err(Error::InfeasibleStep(format!(
                    "both sides of the FD stencil are infeasible along coordinate {i}"
                )))
            }
        };
        grad.push(g);
    }
    Ok(grad)
}

/// Richardson ratio `(g(h) - g(h/2)) / (g(h/2) - g(h/4))` per coordinate.
///
/// For a central difference with O(h²) truncation error the ratio tends to 4.
pub fn fd_step_halving_ratio<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let g1 = fd_gradient(f, x, h)?;
    let g2 = fd_gradient(f, x, h / 2.0)?;
    let g4 = fd_gradient(f, x, h / 4.0)?;
    Ok((0..x.len()).map(|i| (g1[i] - g2[i]) / (g2[i] - g4[i])).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const STALL_RELATIVE: f64 = 1e-14;
const STALL_PATIENCE: usize = 3;

/// BFGS on FD gradients with Armijo backtracking.
///
/// Infeasible trial points (the objective returns `Err`) are treated as an
/// infinite loss and rejected by the line search, so the trace is monotone.
/// Reaching `max_iters` is reported through [`StopReason::MaxIters`] rather
/// than an error so callers can decide.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &LearningConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut loss = f(&x)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        loss,
        step: 0.0,
    }];
    if n == 0 {
        return Ok(Minimum {
            x,
            loss,
            gradient_norm: 0.0,
            trace,
            stop: StopReason::Stationary,
        });
    }

    let identity = |scale: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect()
    };
    let mut inv_h = identity(cfg.step_size);
    let mut grad = fd_gradient(&mut f, &x, cfg.fd_step)?;
    let mut stop = StopReason::MaxIters;
    let mut flat_steps = 0;

    for iteration in 1..=cfg.max_iters {
        if norm(&grad) < cfg.tolerance {
            stop = StopReason::Stationary;
            break;
        }
        let mut direction: Vec<f64> = inv_h.iter().map(|row| -dot(row, &grad)).collect();
        if dot(&direction, &grad) >= 0.0 {
            inv_h = identity(cfg.step_size);
            direction = grad.iter().map(|g| -cfg.step_size * g).collect();
        }

        let accepted = line_search(&mut f, &x, loss, &grad, &direction).or_else(|| {
            // retry once along steepest descent
            inv_h = identity(cfg.step_size);
            let sd: Vec<f64> = grad.iter().map(|g| -cfg.step_size * g).collect();
            line_search(&mut f, &x, loss, &grad, &sd).map(|(t, xn, ln)| (t, xn, ln))
        });
        let Some((step, x_new, loss_new)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };

        let grad_new = fd_gradient(&mut f, &x_new, cfg.fd_step)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            bfgs_update(&mut inv_h, &s, &y, sy);
        }
        // progress below rounding level means the FD gradient is noise
        if loss - loss_new <= STALL_RELATIVE * loss.abs() {
            flat_steps += 1;
        } else {
            flat_steps = 0;
        }
        x = x_new;
        loss = loss_new;
        grad = grad_new;
        trace.push(TraceEntry {
            iteration,
            loss,
            step,
        });
        if flat_steps >= STALL_PATIENCE {
            stop = StopReason::Stalled;
            break;
        }
    }
    Ok(Minimum {
        x,
        loss,
        gradient_norm: norm(&grad),
        trace,
        stop,
    })
}

fn line_search<F>(
    f: &mut F,
    x: &[f64],
    loss: f64,
    grad: &[f64],
    direction: &[f64],
) -> Option<(f64, Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let slope = dot(grad, direction);
    if slope >= 0.0 {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + t * d).collect();
        if let Ok(v) = f(&trial) {
            if v.is_finite() && v <= loss + 1e-4 * t * slope && v <= loss {
                return Some((t, trial, v));
            }
        }
        t *= 0.5;
    }
    None
}

fn bfgs_update(inv_h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = inv_h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            inv_h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
