//! Run manifests: what was run, with which resolved configuration, and
//! what it wrote.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_digest: String,
    pub config: C,
    pub seeds: Vec<u64>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

pub fn digest<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_vec(config).expect("config serializes to JSON");
    hex::encode(Sha256::digest(&json))
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &str, config: C, seeds: Vec<u64>, out: &Path, artifacts: &[PathBuf]) -> Self {
        let artifacts = artifacts
            .iter()
            .map(|p| {
                p.strip_prefix(out)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .replace('\\', "/")
            })
            .collect();
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: digest(&config),
            config,
            seeds,
            artifacts,
        }
    }

    /// Writes `manifest.json` into `out` and returns its path.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        crate::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_sha256_of_json() {
        // sha256("{\"a\":1}")
        assert_eq!(
            digest(&serde_json::json!({"a": 1})),
            "015abd7f5cc57a2dd94b7590f04ad8084273905ee33ec5cebeae62276a97f862"
        );
    }
}
