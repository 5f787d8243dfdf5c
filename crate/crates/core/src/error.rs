use thiserror::Error;

use crate::learn::TraceEntry;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("target {target} for feature `{feature}` lies outside the achievable range [{min}, {max}]")]
    InfeasibleConstraints {
        feature: String,
        target: f64,
        min: f64,
        max: f64,
    },

    #[error("target for feature `{feature}` sits on the moment-polytope boundary without a joint vertex solution")]
    DegenerateBoundary { feature: String },

    #[error("solver hit the iteration cap ({iterations}) with max residual {max_residual:e}")]
    NonConvergence {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("learner did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    LearnerNonConvergence {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<TraceEntry>,
    },

    #[error("line search could not find a feasible step: {0}")]
    InfeasibleStep(String),

    #[error("grid extent {extent} is narrower than 6 standard deviations ({required})")]
    GridTooNarrow { extent: f64, required: f64 },

    #[error("distribution has {found} entries but the space has {expected}")]
    SpaceMismatch { expected: usize, found: usize },

    #[error("p[{index}] = {p} > 0 while q[{index}] = 0")]
    AbsoluteContinuityViolation { index: usize, p: f64 },

    #[error("unsupported query kind `{0}` for this operation")]
    UnsupportedQueryKind(String),

    #[error("horizon {horizon} exceeds the configured cap {cap}")]
    HorizonOverflow { horizon: usize, cap: usize },

    #[error("path space of {size} paths exceeds the cap {cap}")]
    PathSpaceTooLarge { size: u128, cap: usize },

    #[error("enumeration of {size} candidates exceeds the cap")]
    EnumerationTooLarge { size: u128 },

    #[error("no candidate reaches fit tolerance {eps:e}")]
    ToleranceUnreachable { eps: f64 },

    #[error("at timestep {step}: {source}")]
    AtTimestep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at grid node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Strips `AtTimestep`/`AtNode` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTimestep { source, .. } | Error::AtNode { source, .. } => source.root(),
            other => other,
        }
    }
}
