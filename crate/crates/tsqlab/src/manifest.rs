//! Run manifests: what ran, with which resolved configuration, and the
//! digest of every file it wrote.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Ensemble level: E1, E2, E3, Q, or `summary` for reports.
    pub ensemble: String,
    pub status: String,
    pub summary: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    /// The resolved configuration; `tsqlab <command> --config manifest.json`
    /// reruns it.
    pub resolved_config: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub rng: String,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
