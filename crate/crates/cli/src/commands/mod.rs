//! Command implementations. Each command loads its prerequisites from disk
//! (failing with a message that names the producing command), does its work
//! through the library, writes artifacts, and records a run manifest.

pub mod detect;
pub mod explain;
pub mod gen;
pub mod qm;
pub mod render;
pub mod report;
pub mod train;

use std::path::Path;

use aee_core::autoencoder::{load_model, AEModel};
use aee_core::io::read_dataset_ndjson;
use aee_core::TimeSeries;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

/// Errors with the producing command when `path` does not exist.
pub fn require(path: &Path, producer: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Prereq { artifact: path.to_path_buf(), producer: producer.to_string() })
    }
}

pub fn load_dataset(resolved: &Resolved) -> CliResult<Vec<TimeSeries>> {
    let path = resolved.dataset_path();
    require(&path, "gen")?;
    Ok(read_dataset_ndjson(&path)?)
}

pub fn load_trained_model(resolved: &Resolved) -> CliResult<AEModel> {
    let path = resolved.model_path();
    require(&path, "train")?;
    Ok(load_model(&path)?)
}
