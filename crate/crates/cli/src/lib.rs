//! Config-driven experiment runner and verification suite.
//!
//! Each run reads a JSON config, dispatches to one library operation and
//! writes `report.json`, CSV traces and `manifest.json` into an output
//! directory. See [`error::exit`] for the exit-code table.

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, Kind};
pub use error::{exit, CliError};
pub use manifest::RunManifest;
pub use run::{run_experiment, RunOutcome, RunRequest, OUT_ENV};
pub use verify::{verify_suite, Fault, Profile, VerifyReport};
