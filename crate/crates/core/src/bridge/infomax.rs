//! Exact information-theoretic checks on small alphabets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{Query, QueryKind};
use crate::space::DiscreteDistribution;

use super::info::{conditional_mutual_information, mutual_information, mutual_information_between, JointDistribution};

/// Values within this distance count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const INFOMAX_MAX_STATES: usize = 6;
/// Cap on the number of enumerated encoders (`3^6`).
pub const INFOMAX_MAX_ENCODERS: u128 = 729;

/// `I[g(X); X]` from the exact joint of `(g(X), X)`.
fn pushforward_information(system: &DiscreteDistribution, map: &[usize], n_out: usize) -> Result<f64> {
    let n = system.len();
    let mut joint = vec![0.0; n_out * n];
    for (x, &p) in system.weights().iter().enumerate() {
        joint[map[x] * n + x] += p;
    }
    mutual_information(&JointDistribution::new(vec![n_out, n], joint)?)
}

fn injective_on_support(system: &DiscreteDistribution, map: &[usize]) -> bool {
    let mut seen = std::collections::HashSet::new();
    system
        .weights()
        .iter()
        .zip(map)
        .filter(|(p, _)| **p > 0.0)
        .all(|(_, g)| seen.insert(*g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInformation {
    pub query: String,
    pub information: f64,
    pub injective: bool,
    /// `I ≤ H[X]`, with equality exactly when the map is injective on the support.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardestQueryReport {
    pub entropy: f64,
    pub queries: Vec<QueryInformation>,
    pub all_hold: bool,
}

/// Verifies `I[g(X); X] ≤ H[X]` for each deterministic query. Constant
/// queries carry no information and are reported with `I = 0`.
pub fn hardest_query_check(system: &DiscreteDistribution, queries: &[Query]) -> Result<HardestQueryReport> {
    let h = system.entropy();
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let (information, injective) = match &q.kind {
            QueryKind::Constant { .. } => (0.0, system.weights().iter().filter(|&&p| p > 0.0).count() <= 1),
            _ => {
                let map = q
                    .output_map()
                    .ok_or_else(|| Error::UnsupportedQueryKind(q.kind_name().into()))?;
                system.ensure_len(map.len())?;
                (
                    pushforward_information(system, &map, q.output_space.len())?,
                    injective_on_support(system, &map),
                )
            }
        };
        let equal = (information - h).abs() <= TIE_TOLERANCE;
        out.push(QueryInformation {
            query: q.name.clone(),
            information,
            injective,
            holds: information <= h + TIE_TOLERANCE && equal == injective,
        });
    }
    Ok(HardestQueryReport {
        entropy: h,
        all_hold: out.iter().all(|q| q.holds),
        queries: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderScore {
    pub encoder: Vec<usize>,
    /// Expected reconstruction loss `E_x KL(δ_x ‖ p(·|a(x)))`.
    pub loss: f64,
    pub information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMaxReport {
    pub argmin_loss_set: Vec<Vec<usize>>,
    pub argmax_mi_set: Vec<Vec<usize>>,
    pub equal: bool,
    pub encoders: Vec<EncoderScore>,
}

/// Enumerates every deterministic encoder `a: X → {0..k-1}`.
///
/// Each data point `x` is reconstructed from its code as the maxent
/// distribution consistent with the code's block, which is `p(·|a(x))`, so the
/// loss is the mean of `-ln p(x|a(x))`. MI is computed separately from the
/// exact `(x, a)` joint.
pub fn infomax_bruteforce_check(system: &DiscreteDistribution, alphabet: usize) -> Result<InfoMaxReport> {
    let n = system.len();
    let size = (alphabet as u128).saturating_pow(n as u32);
    if n > INFOMAX_MAX_STATES || size > INFOMAX_MAX_ENCODERS {
        return Err(Error::EnumerationTooLarge { size });
    }
    if alphabet == 0 || n == 0 {
        return Err(Error::invalid("need at least one state and one symbol"));
    }
    let p = system.weights();
    let total = alphabet.pow(n as u32);
    let mut encoders = Vec::with_capacity(total);
    for code in 0..total {
        let enc: Vec<usize> = (0..n).map(|x| (code / alphabet.pow(x as u32)) % alphabet).collect();
        let mut block = vec![0.0; alphabet];
        for (x, &a) in enc.iter().enumerate() {
            block[a] += p[x];
        }
        let loss: f64 = (0..n)
            .filter(|&x| p[x] > 0.0)
            .map(|x| -p[x] * (p[x] / block[enc[x]]).ln())
            .sum();
        let mut joint = vec![0.0; n * alphabet];
        for (x, &a) in enc.iter().enumerate() {
            joint[x * alphabet + a] = p[x];
        }
        let information = mutual_information_between(&JointDistribution::new(vec![n, alphabet], joint)?, &[0], &[1])?;
        encoders.push(EncoderScore {
            encoder: enc,
            loss,
            information,
        });
    }
    let min_loss = encoders.iter().map(|e| e.loss).fold(f64::INFINITY, f64::min);
    let max_mi = encoders.iter().map(|e| e.information).fold(f64::NEG_INFINITY, f64::max);
    let argmin: Vec<Vec<usize>> = encoders
        .iter()
        .filter(|e| e.loss <= min_loss + TIE_TOLERANCE)
        .map(|e| e.encoder.clone())
        .collect();
    let argmax: Vec<Vec<usize>> = encoders
        .iter()
        .filter(|e| e.information >= max_mi - TIE_TOLERANCE)
        .map(|e| e.encoder.clone())
        .collect();
    Ok(InfoMaxReport {
        equal: argmin == argmax,
        argmin_loss_set: argmin,
        argmax_mi_set: argmax,
        encoders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoDecompositionReport {
    /// `I[x; a, φ]`.
    pub joint_information: f64,
    /// `I[x; φ]`.
    pub parameter_information: f64,
    /// `I[a; x | φ]`, the redundancy term.
    pub redundancy: f64,
    /// `|I[x;φ] − (I[x;a,φ] − I[a;x|φ])|`.
    pub residual: f64,
}

pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

impl InfoDecompositionReport {
    pub fn holds(&self) -> bool {
        self.residual < DECOMPOSITION_TOLERANCE
    }
}

/// Chain-rule decomposition on a joint over axes `(x, a, φ)`.
pub fn info_decomposition_check(joint: &JointDistribution) -> Result<InfoDecompositionReport> {
    if joint.shape().len() != 3 {
        return Err(Error::invalid("decomposition needs a joint over (x, a, phi)"));
    }
    let joint_information = mutual_information_between(joint, &[0], &[1, 2])?;
    let parameter_information = mutual_information_between(joint, &[0], &[2])?;
    let redundancy = conditional_mutual_information(joint, &[1], &[0], &[2])?;
    Ok(InfoDecompositionReport {
        joint_information,
        parameter_information,
        redundancy,
        residual: (parameter_information - (joint_information - redundancy)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::entropy;

    fn uniform4() -> DiscreteDistribution {
        DiscreteDistribution::uniform(4).unwrap()
    }

    #[test]
    fn identity_pushforward_attains_entropy() {
        let q = Query::pushforward("id", vec![0, 1, 2, 3], 4).unwrap();
        let r = hardest_query_check(&uniform4(), &[q]).unwrap();
        assert!((r.queries[0].information - 4f64.ln()).abs() < 1e-15);
        assert!(r.all_hold);
    }

    #[test]
    fn mod_two_is_half() {
        let q = Query::pushforward("mod2", vec![0, 1, 0, 1], 2).unwrap();
        let r = hardest_query_check(&uniform4(), &[q]).unwrap();
        assert!((r.queries[0].information - 2f64.ln()).abs() < 1e-15);
        assert!(!r.queries[0].injective && r.all_hold);
    }

    #[test]
    fn constant_pushforward_is_zero() {
        let q = Query::pushforward("const", vec![0, 0, 0, 0], 1).unwrap();
        let c = Query::constant("c", DiscreteDistribution::uniform(2).unwrap()).unwrap();
        let r = hardest_query_check(&uniform4(), &[q, c]).unwrap();
        assert_eq!(r.queries[0].information, 0.0);
        assert_eq!(r.queries[1].information, 0.0);
        assert!(r.all_hold);
    }

    #[test]
    fn infomax_sets_agree_on_generic_system() {
        let p = DiscreteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let r = infomax_bruteforce_check(&p, 2).unwrap();
        assert_eq!(r.encoders.len(), 16);
        assert!(r.equal, "{r:?}");
        // {0,3 | 1,2} splits the mass 0.5/0.5
        assert!(r.argmax_mi_set.contains(&vec![0, 1, 1, 0]));
    }

    #[test]
    fn constant_encoder_is_worst() {
        let p = DiscreteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let r = infomax_bruteforce_check(&p, 2).unwrap();
        let constant = &r.encoders[0];
        assert_eq!(constant.encoder, vec![0, 0, 0, 0]);
        assert!(constant.information < 1e-15);
        let worst = r.encoders.iter().map(|e| e.loss).fold(0.0, f64::max);
        assert_eq!(constant.loss, worst);
    }

    #[test]
    fn injective_encoder_is_lossless() {
        let w = [0.4, 0.3, 0.2, 0.1];
        let r = infomax_bruteforce_check(&DiscreteDistribution::new(w.to_vec()).unwrap(), 4).unwrap();
        let inj = r.encoders.iter().find(|e| e.encoder == vec![0, 1, 2, 3]).unwrap();
        assert_eq!(inj.loss, 0.0);
        assert!((inj.information - entropy(&w)).abs() < 1e-15);
        assert!(r.argmin_loss_set.contains(&inj.encoder));
    }

    #[test]
    fn enumeration_caps() {
        let p = DiscreteDistribution::uniform(7).unwrap();
        assert!(matches!(infomax_bruteforce_check(&p, 2), Err(Error::EnumerationTooLarge { .. })));
        let p = DiscreteDistribution::uniform(5).unwrap();
        assert!(matches!(infomax_bruteforce_check(&p, 4), Err(Error::EnumerationTooLarge { size: 1024 })));
    }

    #[test]
    fn decomposition_with_independent_code() {
        let j = JointDistribution::product(&[&[0.3, 0.7], &[0.5, 0.5], &[0.2, 0.8]]).unwrap();
        let r = info_decomposition_check(&j).unwrap();
        assert!(r.redundancy < 1e-15);
        assert!((r.joint_information - r.parameter_information).abs() < 1e-15);
    }
}
