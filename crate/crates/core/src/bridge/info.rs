//! Exact information measures on finite joint tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::NORMALIZATION_TOL;

/// A normalized table over the product of two or three finite alphabets,
/// stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointDistribution {
    shape: Vec<usize>,
    table: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    shape: Vec<usize>,
    table: Vec<f64>,
}

impl TryFrom<RawJoint> for JointDistribution {
    type Error = Error;
    fn try_from(raw: RawJoint) -> Result<Self> {
        JointDistribution::new(raw.shape, raw.table)
    }
}

impl JointDistribution {
    pub fn new(shape: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&shape.len()) || shape.iter().any(|&d| d == 0) {
            return Err(Error::invalid("joint needs two or three non-empty axes"));
        }
        if shape.iter().product::<usize>() != table.len() {
            return Err(Error::invalid("joint table size does not match its shape"));
        }
        if table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("joint entries must be non-negative"));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("joint sums to {total}, not 1")));
        }
        Ok(JointDistribution { shape, table })
    }

    /// Builds from unnormalized non-negative masses.
    pub fn from_masses(shape: Vec<usize>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("joint masses must have positive total"));
        }
        JointDistribution::new(shape, masses.into_iter().map(|m| m / total).collect())
    }

    /// Outer product of independent marginals.
    pub fn product(marginals: &[&[f64]]) -> Result<Self> {
        let shape: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
        let mut table = vec![1.0];
        for m in marginals {
            table = table.iter().flat_map(|t| m.iter().map(move |v| t * v)).collect();
        }
        JointDistribution::new(shape, table)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for (axis, &d) in self.shape.iter().enumerate().rev() {
            idx[axis] = flat % d;
            flat /= d;
        }
        idx
    }

    /// Marginal over `axes` (in the given order), flattened row-major.
    pub fn marginal(&self, axes: &[usize]) -> Vec<f64> {
        let dims: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; dims.iter().product()];
        for (flat, &p) in self.table.iter().enumerate() {
            let idx = self.unravel(flat);
            out[project(&idx, axes, &dims)] += p;
        }
        out
    }

    fn check_axes(&self, groups: &[&[usize]]) -> Result<()> {
        let mut seen = vec![false; self.shape.len()];
        for &g in groups {
            for &a in g {
                if a >= self.shape.len() || seen[a] {
                    return Err(Error::invalid("axes must be distinct and in range"));
                }
                seen[a] = true;
            }
        }
        Ok(())
    }
}

fn project(idx: &[usize], axes: &[usize], dims: &[usize]) -> usize {
    axes.iter().zip(dims).fold(0, |acc, (&a, &d)| acc * d + idx[a])
}

/// `I[A;B]` for a two-axis joint.
pub fn mutual_information(joint: &JointDistribution) -> Result<f64> {
    if joint.shape().len() != 2 {
        return Err(Error::invalid("mutual_information needs a two-axis joint"));
    }
    mutual_information_between(joint, &[0], &[1])
}

/// `I[A;B] = Σ p(a,b) ln(p(a,b) / (p(a)p(b)))` between two groups of axes,
/// marginalizing out any axis in neither group.
pub fn mutual_information_between(joint: &JointDistribution, a: &[usize], b: &[usize]) -> Result<f64> {
    joint.check_axes(&[a, b])?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let p_ab = joint.marginal(&ab);
    let p_a = joint.marginal(a);
    let p_b = joint.marginal(b);
    let nb = p_b.len();
    let mut total = 0.0;
    for (i, &pa) in p_a.iter().enumerate() {
        for (j, &pb) in p_b.iter().enumerate() {
            let p = p_ab[i * nb + j];
            if p > 0.0 {
                total += p * (p / (pa * pb)).ln();
            }
        }
    }
    Ok(total.max(0.0))
}

/// `I[A;B|C] = Σ p(a,b,c) ln(p(a,b,c) p(c) / (p(a,c) p(b,c)))`.
pub fn conditional_mutual_information(
    joint: &JointDistribution,
    a: &[usize],
    b: &[usize],
    given: &[usize],
) -> Result<f64> {
    joint.check_axes(&[a, b, given])?;
    let dims = |axes: &[usize]| -> Vec<usize> { axes.iter().map(|&x| joint.shape[x]).collect() };
    let abc: Vec<usize> = a.iter().chain(b).chain(given).copied().collect();
    let ac: Vec<usize> = a.iter().chain(given).copied().collect();
    let bc: Vec<usize> = b.iter().chain(given).copied().collect();
    let p_abc = joint.marginal(&abc);
    let p_ac = joint.marginal(&ac);
    let p_bc = joint.marginal(&bc);
    let p_c = joint.marginal(given);
    let (da, db, dc) = (dims(a), dims(b), dims(given));
    let (na, nb, nc) = (
        da.iter().product::<usize>(),
        db.iter().product::<usize>(),
        dc.iter().product::<usize>(),
    );
    let mut total = 0.0;
    for i in 0..na {
        for j in 0..nb {
            for k in 0..nc {
                let p = p_abc[(i * nb + j) * nc + k];
                if p > 0.0 {
                    total += p * (p * p_c[k] / (p_ac[i * nc + k] * p_bc[j * nc + k])).ln();
                }
            }
        }
    }
    Ok(total.max(0.0))
}

/// Shannon entropy of the marginal over `axes`.
pub fn marginal_entropy(joint: &JointDistribution, axes: &[usize]) -> f64 {
    crate::space::entropy(&joint.marginal(axes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_joint_has_zero_mi() {
        let j = JointDistribution::product(&[&[0.3, 0.7], &[0.1, 0.5, 0.4]]).unwrap();
        assert!(mutual_information(&j).unwrap() < 1e-15);
    }

    #[test]
    fn diagonal_joint_mi_is_entropy() {
        let mut t = vec![0.0; 16];
        for i in 0..4 {
            t[i * 4 + i] = 0.25;
        }
        let j = JointDistribution::new(vec![4, 4], t).unwrap();
        assert!((mutual_information(&j).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_known_value() {
        let j = JointDistribution::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let expected = 0.8 * (0.4f64 / 0.25).ln() + 0.2 * (0.1f64 / 0.25).ln();
        let mi = mutual_information(&j).unwrap();
        assert!((mi - expected).abs() < 1e-15);
        assert!((mi - 0.1927).abs() < 1e-4);
    }

    #[test]
    fn mi_is_symmetric() {
        let j = JointDistribution::from_masses(vec![2, 3], vec![0.1, 0.3, 0.2, 0.05, 0.15, 0.2]).unwrap();
        let ab = mutual_information_between(&j, &[0], &[1]).unwrap();
        let ba = mutual_information_between(&j, &[1], &[0]).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn overlapping_axes_rejected() {
        let j = JointDistribution::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(mutual_information_between(&j, &[0], &[0]).is_err());
    }
}
