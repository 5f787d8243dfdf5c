//! Learning abstractions by minimizing leakiness.
//!
//! Gradients with respect to targets are central finite differences wrapped
//! around the exact inner maxent solve.

mod composite;
mod dimension;
mod encoder;
mod optimize;
mod targets;

pub use composite::{learn_composite_query, CompositeQueryModel, CompositeValidation};
pub use dimension::{select_dimension, CandidateFit, DimensionSelection, DEFAULT_PLATEAU_DELTA, PLATEAU_FLOOR};
pub use encoder::{learn_encoder, EncoderAbstraction, EncoderFit, EncoderMode, MAX_SWEEPS};
pub use optimize::{
    fd_gradient, fd_step_halving_ratio, minimize, trace_csv, LearningConfig, Minimum, StopReason, TraceEntry,
    TRACE_CSV_HEADER,
};
pub use targets::{learn_targets, learn_targets_dataset, learn_targets_from, TargetFit};
