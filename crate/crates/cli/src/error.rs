use std::path::PathBuf;

use abstraction_core::Error as CoreError;
use serde::Serialize;
use thiserror::Error;

/// Process exit codes. Kept stable; scripts depend on them.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const CONFIG_INVALID: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const NONCONVERGENCE: u8 = 4;
    pub const NUMERIC: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {}", .diagnostics.join("; "))]
    ConfigInvalid { diagnostics: Vec<String> },

    #[error(transparent)]
    Module(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::ConfigInvalid {
            diagnostics: vec![msg.into()],
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid { .. } => exit::CONFIG_INVALID,
            CliError::Io { .. } => exit::IO,
            CliError::Module(e) => match e.root() {
                CoreError::InfeasibleConstraints { .. }
                | CoreError::DegenerateBoundary { .. }
                | CoreError::InfeasibleStep(_)
                | CoreError::ToleranceUnreachable { .. } => exit::INFEASIBLE,
                CoreError::NonConvergence { .. } | CoreError::LearnerNonConvergence { .. } => exit::NONCONVERGENCE,
                _ => exit::NUMERIC,
            },
        }
    }

    /// Short machine-readable category for the JSON error report.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid { .. } => "config_invalid",
            CliError::Io { .. } => "io",
            CliError::Module(e) => match e.root() {
                CoreError::InvalidInput(_) => "invalid_input",
                CoreError::InfeasibleConstraints { .. } => "infeasible_constraints",
                CoreError::DegenerateBoundary { .. } => "degenerate_boundary",
                CoreError::NonConvergence { .. } => "non_convergence",
                CoreError::LearnerNonConvergence { .. } => "learner_non_convergence",
                CoreError::InfeasibleStep(_) => "infeasible_step",
                CoreError::GridTooNarrow { .. } => "grid_too_narrow",
                CoreError::SpaceMismatch { .. } => "space_mismatch",
                CoreError::AbsoluteContinuityViolation { .. } => "absolute_continuity_violation",
                CoreError::UnsupportedQueryKind(_) => "unsupported_query_kind",
                CoreError::HorizonOverflow { .. } => "horizon_overflow",
                CoreError::PathSpaceTooLarge { .. } => "path_space_too_large",
                CoreError::EnumerationTooLarge { .. } => "enumeration_too_large",
                CoreError::ToleranceUnreachable { .. } => "tolerance_unreachable",
                CoreError::AtTimestep { .. } | CoreError::AtNode { .. } => "numeric",
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        let diagnostics = match self {
            CliError::ConfigInvalid { diagnostics } => diagnostics.clone(),
            other => vec![other.to_string()],
        };
        ErrorReport {
            error: self.category(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            diagnostics,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub exit_code: u8,
    pub message: String,
    pub diagnostics: Vec<String>,
}

pub type CliResult<T> = std::result::Result<T, CliError>;
