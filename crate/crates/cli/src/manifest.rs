use serde::{Deserialize, Serialize};

use crate::config::Prepared;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written last into every run directory. It lists every
/// other file in the directory; it does not list itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the config bytes as read.
    pub config_hash: String,
    pub tool_version: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub kind: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub passed: bool,
    pub summary: String,
    pub exit_code: u8,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn new(
        prepared: &Prepared,
        config_hash: &str,
        inputs: Vec<FileDigest>,
        outputs: Vec<FileDigest>,
        passed: bool,
        summary: String,
        exit_code: u8,
    ) -> Self {
        RunManifest {
            config_hash: config_hash.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            kind: prepared.kind.to_string(),
            seed: prepared.seed,
            inputs,
            outputs,
            passed,
            summary,
            exit_code,
        }
    }
}
