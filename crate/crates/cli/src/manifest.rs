//! Per-command run manifests: what ran, against which config, with which
//! derived seeds, and what it wrote. Manifests live under
//! `<out_dir>/manifests/<command>.json`. They carry wall time, so they are
//! the one artifact class exempt from the byte-identical contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use aee_core::autoencoder::MODEL_FORMAT_VERSION;
use aee_core::io::write_json;

use crate::config::{Resolved, CONFIG_FORMAT_VERSION};
use crate::error::CliResult;

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub core: String,
    pub cli: String,
    pub config_format: u32,
    pub model_format: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_hash: String,
    pub versions: Versions,
    /// Derived per-stage seeds (see the config module for the derivation).
    pub seeds: BTreeMap<String, u64>,
    /// Every file this command wrote, relative to `out_dir` when inside it.
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

/// Collects written artifact paths while a command runs, then shapes them
/// into the manifest.
pub struct ArtifactLog {
    started: Instant,
    paths: Vec<PathBuf>,
}

impl ArtifactLog {
    pub fn new() -> ArtifactLog {
        ArtifactLog { started: Instant::now(), paths: Vec::new() }
    }

    pub fn record(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    /// Writes `manifests/<command>.json` and returns its path.
    pub fn finish(self, resolved: &Resolved, command: &str) -> CliResult<PathBuf> {
        let mut artifacts: Vec<String> = self
            .paths
            .iter()
            .map(|p| {
                p.strip_prefix(&resolved.out_dir)
                    .map(|rel| rel.to_string_lossy().into_owned())
                    .unwrap_or_else(|_| p.to_string_lossy().into_owned())
            })
            .collect();
        artifacts.sort();
        artifacts.dedup();
        let manifest = RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config_hash: resolved.config_hash.clone(),
            versions: Versions {
                core: aee_core::VERSION.to_string(),
                cli: env!("CARGO_PKG_VERSION").to_string(),
                config_format: CONFIG_FORMAT_VERSION,
                model_format: MODEL_FORMAT_VERSION,
            },
            seeds: resolved.stage_seeds(),
            artifacts,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = resolved.out_dir.join("manifests").join(format!("{command}.json"));
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
