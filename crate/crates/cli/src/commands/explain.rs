//! `aee explain` and `aee aee`: per-time-step importance heatmaps for
//! selected series, one method at a time (the `aee` command fixes the
//! method to the ensemble).

use std::path::PathBuf;

use clap::Args;

use aee_core::explain::{explain, Explanation, Method, Target};
use aee_core::io::{read_detections_csv, write_explanation_csv, write_explanations_ndjson};
use aee_core::{Error, TimeSeries};

use crate::commands::{load_dataset, load_trained_model, require};
use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactLog;

/// Instance selection shared by `explain` and `aee`: exactly one selector.
#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Comma-separated series ids.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
    /// Every series labeled NOK.
    #[arg(long)]
    pub nok: bool,
    /// Every series the detector flagged as an outlier.
    #[arg(long)]
    pub flagged: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// One of: gradcam, lime, shap, lrp, aee.
    #[arg(long)]
    pub method: String,
    /// `combined` or `latent<i>`.
    #[arg(long, default_value = "combined")]
    pub target: String,
    #[command(flatten)]
    pub select: SelectArgs,
}

#[derive(Debug, Args)]
pub struct AeeArgs {
    /// `combined` or `latent<i>`.
    #[arg(long, default_value = "combined")]
    pub target: String,
    #[command(flatten)]
    pub select: SelectArgs,
}

fn select_instances(
    resolved: &Resolved,
    dataset: &[TimeSeries],
    select: &SelectArgs,
) -> CliResult<Vec<usize>> {
    let selectors = usize::from(!select.ids.is_empty())
        + usize::from(select.nok)
        + usize::from(select.flagged);
    if selectors != 1 {
        return Err(CliError::Config(
            "select instances with exactly one of --ids, --nok, or --flagged".into(),
        ));
    }
    if !select.ids.is_empty() {
        let mut indices = Vec::with_capacity(select.ids.len());
        for id in &select.ids {
            let idx = dataset
                .iter()
                .position(|s| &s.id == id)
                .ok_or_else(|| Error::Data(format!("series '{id}' not found in dataset")))?;
            indices.push(idx);
        }
        return Ok(indices);
    }
    if select.nok {
        let indices: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label.is_some_and(|l| l.is_nok()))
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(CliError::Core(Error::Data(
                "no series labeled NOK in the dataset".into(),
            )));
        }
        return Ok(indices);
    }
    let detections_path = resolved.out_dir.join("detections.csv");
    require(&detections_path, "detect")?;
    let rows = read_detections_csv(&detections_path)?;
    let mut indices = Vec::new();
    for row in rows.iter().filter(|r| r.flagged) {
        let idx = dataset.iter().position(|s| s.id == row.id).ok_or_else(|| {
            Error::Data(format!("detections list '{}' which is not in the dataset", row.id))
        })?;
        indices.push(idx);
    }
    if indices.is_empty() {
        return Err(CliError::Core(Error::Data(
            "the detector flagged no series; nothing to explain".into(),
        )));
    }
    Ok(indices)
}

/// Path of the NDJSON batch written for a method/target pair.
pub fn batch_path(resolved: &Resolved, method: Method, target: Target) -> PathBuf {
    resolved.out_dir.join("explanations").join(format!("{method}_{}.ndjson", target.label()))
}

pub fn run(
    resolved: &Resolved,
    method: Method,
    target_raw: &str,
    select: &SelectArgs,
    command: &str,
) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let target = Target::parse(target_raw)?;
    let dataset = load_dataset(resolved)?;
    let model = load_trained_model(resolved)?;
    let indices = select_instances(resolved, &dataset, select)?;
    let settings = resolved.explainer_settings();

    let mut explanations: Vec<Explanation> = Vec::with_capacity(indices.len());
    for &i in &indices {
        explanations.push(explain(&model, &dataset[i], method, target, &settings)?);
    }

    let ndjson = batch_path(resolved, method, target);
    write_explanations_ndjson(&ndjson, &explanations)?;
    log.record(&ndjson);
    for e in &explanations {
        let csv = resolved
            .out_dir
            .join("explanations")
            .join(format!("{}_{method}_{}.csv", e.series_id, target.label()));
        write_explanation_csv(&csv, e)?;
        log.record(&csv);
    }

    log.finish(resolved, command)?;
    println!(
        "explained {} series with {method} ({}) -> {}",
        explanations.len(),
        target.label(),
        ndjson.display()
    );
    Ok(())
}
