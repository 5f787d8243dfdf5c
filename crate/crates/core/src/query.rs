//! Queries map a distribution over states to a distribution over outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{DiscreteDistribution, NORMALIZATION_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryKind {
    /// Identity on `n_states` states.
    Reconstruction { n_states: usize },
    /// `partition[x]` is the block index of state `x`.
    CoarseGrain { partition: Vec<usize> },
    /// `map[x]` is the output bin of state `x`.
    Pushforward { map: Vec<usize> },
    /// Ignores its input.
    Constant { output: DiscreteDistribution },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuery")]
pub struct Query {
    pub name: String,
    #[serde(flatten)]
    pub kind: QueryKind,
    pub output_space: Vec<String>,
}

#[derive(Deserialize)]
struct RawQuery {
    name: String,
    #[serde(flatten)]
    kind: QueryKind,
    #[serde(default)]
    output_space: Option<Vec<String>>,
}

impl TryFrom<RawQuery> for Query {
    type Error = Error;
    fn try_from(raw: RawQuery) -> Result<Self> {
        let q = Query::from_kind(raw.name, raw.kind)?;
        match raw.output_space {
            Some(labels) => q.with_output_labels(labels),
            None => Ok(q),
        }
    }
}

fn bin_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

impl Query {
    fn from_kind(name: String, kind: QueryKind) -> Result<Self> {
        let n_out = match &kind {
            QueryKind::Reconstruction { n_states } => {
                if *n_states == 0 {
                    return Err(Error::invalid("reconstruction query needs states"));
                }
                *n_states
            }
            QueryKind::CoarseGrain { partition: map } | QueryKind::Pushforward { map } => {
                if map.is_empty() {
                    return Err(Error::invalid(format!("query `{name}` has an empty map")));
                }
                let n = map.iter().max().map_or(0, |m| m + 1);
                if kind_is_partition(&kind) {
                    // every block index below the max must be used
                    let mut used = vec![false; n];
                    for &b in map {
                        used[b] = true;
                    }
                    if used.iter().any(|u| !u) {
                        return Err(Error::invalid(format!(
                            "partition of query `{name}` skips a block index"
                        )));
                    }
                }
                n
            }
            QueryKind::Constant { output } => output.len(),
        };
        Ok(Query {
            name,
            kind,
            output_space: bin_labels(n_out),
        })
    }

    pub fn reconstruction(name: impl Into<String>, n_states: usize) -> Result<Self> {
        Query::from_kind(name.into(), QueryKind::Reconstruction { n_states })
    }

    pub fn coarse_grain(name: impl Into<String>, partition: Vec<usize>) -> Result<Self> {
        Query::from_kind(name.into(), QueryKind::CoarseGrain { partition })
    }

    /// Pushforward with an explicit number of output bins (bins may be unused).
    pub fn pushforward(name: impl Into<String>, map: Vec<usize>, n_bins: usize) -> Result<Self> {
        let q = Query::from_kind(name.into(), QueryKind::Pushforward { map })?;
        if n_bins < q.output_space.len() {
            return Err(Error::invalid("pushforward map exceeds its bin count"));
        }
        Ok(Query {
            output_space: bin_labels(n_bins),
            ..q
        })
    }

    pub fn constant(name: impl Into<String>, output: DiscreteDistribution) -> Result<Self> {
        Query::from_kind(name.into(), QueryKind::Constant { output })
    }

    pub fn with_output_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() < self.output_space.len() {
            return Err(Error::invalid(format!(
                "query `{}` needs at least {} output labels",
                self.name,
                self.output_space.len()
            )));
        }
        if matches!(self.kind, QueryKind::Reconstruction { .. } | QueryKind::Constant { .. })
            && labels.len() != self.output_space.len()
        {
            return Err(Error::invalid("output labels must match the output dimension"));
        }
        self.output_space = labels;
        Ok(self)
    }

    /// Number of states this query reads, if it reads any.
    pub fn input_len(&self) -> Option<usize> {
        match &self.kind {
            QueryKind::Reconstruction { n_states } => Some(*n_states),
            QueryKind::CoarseGrain { partition: map } | QueryKind::Pushforward { map } => Some(map.len()),
            QueryKind::Constant { .. } => None,
        }
    }

    /// Deterministic state → output map, when the query has one.
    pub fn output_map(&self) -> Option<Vec<usize>> {
        match &self.kind {
            QueryKind::Reconstruction { n_states } => Some((0..*n_states).collect()),
            QueryKind::CoarseGrain { partition: map } | QueryKind::Pushforward { map } => Some(map.clone()),
            QueryKind::Constant { .. } => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            QueryKind::Reconstruction { .. } => "reconstruction",
            QueryKind::CoarseGrain { .. } => "coarse_grain",
            QueryKind::Pushforward { .. } => "pushforward",
            QueryKind::Constant { .. } => "constant",
        }
    }
}

fn kind_is_partition(kind: &QueryKind) -> bool {
    matches!(kind, QueryKind::CoarseGrain { .. })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutput {
    pub distribution: DiscreteDistribution,
}

impl QueryOutput {
    pub fn weights(&self) -> &[f64] {
        self.distribution.weights()
    }
}

pub fn apply_query(query: &Query, dist: &DiscreteDistribution) -> Result<QueryOutput> {
    if let Some(n) = query.input_len() {
        dist.ensure_len(n)?;
    }
    let distribution = match &query.kind {
        QueryKind::Reconstruction { .. } => dist.clone(),
        QueryKind::CoarseGrain { partition: map } | QueryKind::Pushforward { map } => {
            let mut out = vec![0.0; query.output_space.len()];
            for (x, &b) in map.iter().enumerate() {
                out[b] += dist.weights()[x];
            }
            DiscreteDistribution::from_unnormalized(out)?
        }
        QueryKind::Constant { output } => output.clone(),
    };
    Ok(QueryOutput { distribution })
}

/// Weighted collection of queries; weights play the role of `p(Q_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuerySet")]
pub struct QuerySet {
    queries: Vec<Query>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawQuerySet {
    queries: Vec<Query>,
    weights: Vec<f64>,
}

impl TryFrom<RawQuerySet> for QuerySet {
    type Error = Error;
    fn try_from(raw: RawQuerySet) -> Result<Self> {
        QuerySet::new(raw.queries, raw.weights)
    }
}

impl QuerySet {
    pub fn new(queries: Vec<Query>, weights: Vec<f64>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::invalid("query set must be non-empty"));
        }
        if queries.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} queries but {} weights",
                queries.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("query weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("query weights sum to {total}, not 1")));
        }
        Ok(QuerySet { queries, weights })
    }

    pub fn single(query: Query) -> Self {
        QuerySet {
            queries: vec![query],
            weights: vec![1.0],
        }
    }

    pub fn uniform(queries: Vec<Query>) -> Result<Self> {
        let n = queries.len();
        QuerySet::new(queries, vec![1.0 / n as f64; n])
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Query, f64)> {
        self.queries.iter().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceSpec {
    #[default]
    Kl,
    /// Floors `q` at `epsilon` and renormalizes before taking KL.
    SmoothedKl { epsilon: f64 },
}

/// `Σ p ln(p/q)` in nats, with `0·ln(0/·) = 0`.
pub fn divergence(spec: DivergenceSpec, p: &QueryOutput, q: &QueryOutput) -> Result<f64> {
    kl_divergence_with(spec, p.weights(), q.weights())
}

pub fn kl_divergence_with(spec: DivergenceSpec, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SpaceMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    match spec {
        DivergenceSpec::Kl => kl_divergence(p, q),
        DivergenceSpec::SmoothedKl { epsilon } => {
            if !(epsilon > 0.0) {
                return Err(Error::invalid("smoothing epsilon must be positive"));
            }
            let floored: Vec<f64> = q.iter().map(|v| v.max(epsilon)).collect();
            let total: f64 = floored.iter().sum();
            let smoothed: Vec<f64> = floored.iter().map(|v| v / total).collect();
            kl_divergence(p, &smoothed)
        }
    }
}

/// Plain discrete KL divergence.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::AbsoluteContinuityViolation { index: i, p: pi });
            }
            total += pi * (pi / qi).ln();
        }
    }
    // rounding can leave tiny negatives when p == q
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    fn out(w: &[f64]) -> QueryOutput {
        QueryOutput { distribution: dist(w) }
    }

    #[test]
    fn reconstruction_is_identity() {
        let q = Query::reconstruction("id", 4).unwrap();
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(apply_query(&q, &p).unwrap().distribution, p);
    }

    #[test]
    fn coarse_grain_block_sums() {
        let q = Query::coarse_grain("halves", vec![0, 0, 1, 1]).unwrap();
        let o = apply_query(&q, &dist(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert!((o.weights()[0] - 0.3).abs() < 1e-15);
        assert!((o.weights()[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn parity_pushforward_on_uniform() {
        let q = Query::pushforward("parity", vec![0, 1, 0, 1], 2).unwrap();
        let o = apply_query(&q, &DiscreteDistribution::uniform(4).unwrap()).unwrap();
        assert_eq!(o.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn constant_ignores_input() {
        let q = Query::constant("c", dist(&[0.2, 0.8])).unwrap();
        let o = apply_query(&q, &dist(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(o.weights(), &[0.2, 0.8]);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let q = Query::reconstruction("id", 3).unwrap();
        let err = apply_query(&q, &dist(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn partition_with_gap_is_rejected() {
        assert!(Query::coarse_grain("gap", vec![0, 2]).is_err());
    }

    #[test]
    fn kl_known_value() {
        let d = divergence(DivergenceSpec::Kl, &out(&[0.5, 0.5]), &out(&[0.25, 0.75])).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.1438).abs() < 1e-4);
        assert_eq!(divergence(DivergenceSpec::Kl, &out(&[0.5, 0.5]), &out(&[0.5, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn kl_support_violation() {
        let err = divergence(DivergenceSpec::Kl, &out(&[1.0, 0.0]), &out(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::AbsoluteContinuityViolation { index: 0, .. }));
        let smoothed = divergence(
            DivergenceSpec::SmoothedKl { epsilon: 1e-6 },
            &out(&[1.0, 0.0]),
            &out(&[0.0, 1.0]),
        )
        .unwrap();
        assert!(smoothed.is_finite() && smoothed > 10.0);
    }

    #[test]
    fn query_set_weights_must_normalize() {
        let q = Query::reconstruction("id", 2).unwrap();
        assert!(QuerySet::new(vec![q.clone(), q.clone()], vec![0.5, 0.6]).is_err());
        assert!(QuerySet::new(vec![q.clone()], vec![0.5, 0.5]).is_err());
        assert!(QuerySet::new(vec![q.clone(), q], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn query_json_shape() {
        let json = r#"{"name":"cg","kind":"coarse_grain","partition":[0,0,1,1]}"#;
        let q: Query = serde_json::from_str(json).unwrap();
        assert_eq!(q.output_space.len(), 2);
        let set = r#"{"queries":[{"name":"r","kind":"reconstruction","n_states":4}],"weights":[0.7]}"#;
        assert!(serde_json::from_str::<QuerySet>(set).is_err());
    }
}
