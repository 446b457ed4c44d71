//! Experiment manifest: config snapshot, graph hash, tool version, per-run
//! timings and the artifact inventory with checksums. The manifest is the
//! only artifact carrying timing data; everything it points at is
//! byte-deterministic for a fixed config and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::write_atomic;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEntry {
    pub command: String,
    pub tool_version: String,
    pub graph_hash: String,
    pub config: serde_json::Value,
    pub timing_ms: u128,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<RunEntry>,
}

impl Manifest {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let p = Self::path_in(dir);
        if p.exists() {
            Ok(serde_json::from_str(&std::fs::read_to_string(&p)?)?)
        } else {
            Ok(Manifest::default())
        }
    }

    pub fn record(
        &mut self,
        dir: &Path,
        command: &str,
        graph_hash: u64,
        config: serde_json::Value,
        timing_ms: u128,
        artifact_paths: &[PathBuf],
    ) -> anyhow::Result<()> {
        let mut artifacts = Vec::new();
        for p in artifact_paths {
            let bytes = std::fs::read(p)?;
            let digest = Sha256::digest(&bytes);
            let rel = p.strip_prefix(dir).unwrap_or(p);
            artifacts.push(ArtifactEntry {
                path: rel.display().to_string(),
                sha256: format!("{digest:x}"),
            });
        }
        self.entries.push(RunEntry {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            graph_hash: format!("{graph_hash:016x}"),
            config,
            timing_ms,
            artifacts,
        });
        write_atomic(&Self::path_in(dir), serde_json::to_string_pretty(self)?.as_bytes())
    }

    /// Looks up the most recent artifact whose path ends with `suffix`.
    pub fn find_artifact(&self, suffix: &str) -> Option<&ArtifactEntry> {
        self.entries
            .iter()
            .rev()
            .flat_map(|e| e.artifacts.iter())
            .find(|a| a.path.ends_with(suffix))
    }
}
