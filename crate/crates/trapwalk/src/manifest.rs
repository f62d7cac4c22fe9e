//! Append-only run manifests (`manifest.jsonl`).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliResult;
use crate::{GIT_DESCRIBE, TOOL_VERSION};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub master_seed: Option<u64>,
    pub tool_version: String,
    pub git_describe: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per named stage.
    pub timings: BTreeMap<String, f64>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects artifacts and timings while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, config_hash: String, master_seed: Option<u64>) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                config_hash,
                master_seed,
                tool_version: TOOL_VERSION.to_string(),
                git_describe: GIT_DESCRIBE.to_string(),
                started_unix: now(),
                finished_unix: 0.0,
                artifacts: Vec::new(),
                timings: BTreeMap::new(),
            },
            clock: Instant::now(),
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.manifest.artifacts.push(path.display().to_string());
    }

    pub fn timing(&mut self, stage: &str, seconds: f64) {
        self.manifest.timings.insert(stage.to_string(), seconds);
    }

    /// Stamps the end time and total runtime and appends one line to the
    /// manifest next to the artifacts.
    pub fn finish(mut self, dir: &Path) -> CliResult<RunManifest> {
        self.manifest.finished_unix = now();
        self.manifest.timings.insert("total".into(), self.clock.elapsed().as_secs_f64());
        append(&manifest_path(dir), &self.manifest)?;
        Ok(self.manifest)
    }
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

pub fn append(path: &Path, m: &RunManifest) -> CliResult<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(m)?;
    writeln!(f, "{line}")?;
    Ok(())
}
