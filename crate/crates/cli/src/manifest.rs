//! Run manifests: every experiment leaves a `manifest.json` beside its data
//! artifacts recording the resolved configuration, a hash of it, the wall
//! clock and the files written.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub workers: usize,
    pub precision: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
}

/// SHA-256 over the canonical `key=value` lines of the resolved settings.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in config {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl Manifest {
    pub fn new(
        experiment: &str,
        config: BTreeMap<String, String>,
        workers: usize,
        precision: &str,
        wall_clock_seconds: f64,
        files: Vec<String>,
    ) -> Self {
        let config_hash = config_hash(&config);
        Manifest {
            experiment: experiment.to_string(),
            config,
            config_hash,
            workers,
            precision: precision.to_string(),
            wall_clock_seconds,
            files,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(())
    }
}
