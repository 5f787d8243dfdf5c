//! Composite query `Q̃ = Q ∘ m` approximated by multilinear interpolation of
//! exact query outputs stored on a tensor grid of abstraction vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{solve_maxent_on, SolverOptions};
use crate::query::{apply_query, kl_divergence, Query, QueryOutput};
use crate::space::{ConstraintSet, DiscreteDistribution, FeatureFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeQueryModel {
    pub query: String,
    /// Node coordinates per abstraction dimension, strictly increasing.
    pub axes: Vec<Vec<f64>>,
    /// Stored `Q(m(a))` per node, row-major over `axes`.
    pub outputs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeValidation {
    /// Largest `KL(Q̃(a) ‖ Q(m(a)))` over cell midpoints.
    pub max_divergence: f64,
    pub worst_point: Vec<f64>,
    pub points_checked: usize,
}

impl CompositeQueryModel {
    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    /// Multilinear interpolation; `a` must lie inside the grid.
    pub fn evaluate(&self, a: &[f64]) -> Result<QueryOutput> {
        if a.len() != self.axes.len() {
            return Err(Error::invalid("abstraction dimension mismatch"));
        }
        // per axis: lower node index and weight of the upper node
        let mut cells = Vec::with_capacity(a.len());
        for (axis, &v) in self.axes.iter().zip(a) {
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if v < lo - slack || v > hi + slack {
                return Err(Error::invalid(format!("{v} lies outside the grid [{lo}, {hi}]")));
            }
            if axis.len() == 1 {
                cells.push((0, 0.0));
                continue;
            }
            let i = axis.partition_point(|&x| x <= v).clamp(1, axis.len() - 1) - 1;
            let t = ((v - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            cells.push((i, t));
        }
        let width = self.outputs[0].len();
        let mut out = vec![0.0; width];
        for corner in 0..(1usize << a.len()) {
            let mut weight = 1.0;
            let mut flat = 0;
            for (d, &(i, t)) in cells.iter().enumerate() {
                let upper = (corner >> d) & 1 == 1;
                if upper && self.axes[d].len() == 1 {
                    weight = 0.0;
                }
                weight *= if upper { t } else { 1.0 - t };
                flat = flat * self.axes[d].len() + i + usize::from(upper);
            }
            if weight > 0.0 {
                for (o, v) in out.iter_mut().zip(&self.outputs[flat]) {
                    *o += weight * v;
                }
            }
        }
        Ok(QueryOutput {
            distribution: DiscreteDistribution::from_unnormalized(out)?,
        })
    }
}

fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for (d, &n) in dims.iter().enumerate().rev() {
        idx[d] = flat % n;
        flat /= n;
    }
    idx
}

/// Stores exact `Q(m(a))` at every node of the tensor grid spanned by `axes`
/// and validates the interpolant at every cell midpoint.
pub fn learn_composite_query(
    axes: &[Vec<f64>],
    features: &[FeatureFunction],
    n_states: usize,
    query: &Query,
    opts: &SolverOptions,
) -> Result<(CompositeQueryModel, CompositeValidation)> {
    if axes.len() != features.len() {
        return Err(Error::invalid("one grid axis per feature"));
    }
    for axis in axes {
        if axis.is_empty() || axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid axes must be non-empty and strictly increasing"));
        }
    }
    let exact = |a: &[f64]| -> Result<QueryOutput> {
        let c = ConstraintSet {
            features: features.to_vec(),
            targets: a.to_vec(),
        };
        let m = solve_maxent_on(n_states, &c, opts)?;
        apply_query(query, &m.distribution)
    };

    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut outputs = Vec::new();
    let nodes: usize = dims.iter().product();
    for node in 0..nodes {
        let idx = unravel(node, &dims);
        let a: Vec<f64> = idx.iter().zip(axes).map(|(&i, ax)| ax[i]).collect();
        let out = exact(&a).map_err(|e| Error::AtNode {
            node,
            source: Box::new(e),
        })?;
        outputs.push(out.weights().to_vec());
    }
    let model = CompositeQueryModel {
        query: query.name.clone(),
        axes: axes.to_vec(),
        outputs,
    };
    debug_assert_eq!(model.node_count(), nodes);

    let cell_dims: Vec<usize> = dims.iter().map(|&n| n.saturating_sub(1).max(1)).collect();
    let mut validation = CompositeValidation {
        max_divergence: 0.0,
        worst_point: Vec::new(),
        points_checked: 0,
    };
    for cell in 0..cell_dims.iter().product::<usize>() {
        let idx = unravel(cell, &cell_dims);
        let a: Vec<f64> = idx
            .iter()
            .zip(axes)
            .map(|(&i, ax)| if ax.len() == 1 { ax[0] } else { 0.5 * (ax[i] + ax[i + 1]) })
            .collect();
        let truth = exact(&a)?;
        let approx = model.evaluate(&a)?;
        let d = kl_divergence(approx.weights(), truth.weights())?;
        validation.points_checked += 1;
        if d >= validation.max_divergence {
            validation.max_divergence = d;
            validation.worst_point = a;
        }
    }
    Ok((model, validation))
}
