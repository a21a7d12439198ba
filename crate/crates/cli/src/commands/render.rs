//! `aee render`: SVG artifacts from previously written pipeline outputs.

use std::fs;
use std::path::Path;

use clap::{Args, ValueEnum};

use aee_core::explain::{Method, Target};
use aee_core::io::{read_explanations_ndjson, read_json, read_scatter_csv};
use aee_core::quality::QmReport;
use aee_core::render::{render_heatmap, render_qm_boxplot, render_reconstruction, render_scatter};
use aee_core::{Error, TimeSeries};

use crate::commands::{explain::batch_path, load_dataset, load_trained_model, require};
use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderKind {
    /// Series over a red-intensity explanation background.
    Heatmap,
    /// Normalized QM distances per method, noise vs. explanation-guided.
    Boxplot,
    /// 2D latent projection with outlier tags.
    Scatter,
    /// Input series against its autoencoder reconstruction.
    Reconstruction,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_enum)]
    pub kind: RenderKind,
    /// Series id (heatmap and reconstruction).
    #[arg(long)]
    pub id: Option<String>,
    /// Explanation method (heatmap).
    #[arg(long)]
    pub method: Option<String>,
    /// Explanation target (heatmap).
    #[arg(long, default_value = "combined")]
    pub target: String,
}

fn find_series<'a>(dataset: &'a [TimeSeries], id: &str) -> CliResult<&'a TimeSeries> {
    dataset
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| CliError::Core(Error::Data(format!("series '{id}' not found in dataset"))))
}

fn need_id(args: &RenderArgs) -> CliResult<&str> {
    args.id
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--kind {:?} needs --id", args.kind).to_lowercase()))
}

fn write_svg(log: &mut ArtifactLog, path: &Path, svg: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    fs::write(path, svg).map_err(Error::from)?;
    log.record(path);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(resolved: &Resolved, args: &RenderArgs) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let renders = resolved.out_dir.join("renders");
    match args.kind {
        RenderKind::Heatmap => {
            let id = need_id(args)?;
            let method_raw = args
                .method
                .as_deref()
                .ok_or_else(|| CliError::Config("--kind heatmap needs --method".into()))?;
            let method = Method::parse(method_raw)?;
            let target = Target::parse(&args.target)?;
            let dataset = load_dataset(resolved)?;
            let series = find_series(&dataset, id)?;
            let batch = batch_path(resolved, method, target);
            let producer = format!(
                "{} --target {} --ids {id}",
                if method == Method::Aee {
                    "aee".to_string()
                } else {
                    format!("explain --method {method}")
                },
                target.label()
            );
            require(&batch, &producer)?;
            let explanations = read_explanations_ndjson(&batch)?;
            let explanation =
                explanations.iter().find(|e| e.series_id == id).ok_or(CliError::Prereq {
                    artifact: batch.clone(),
                    producer,
                })?;
            let svg = render_heatmap(series, explanation)?;
            let path = renders.join(format!("heatmap_{id}_{method}_{}.svg", target.label()));
            write_svg(&mut log, &path, &svg)?;
        }
        RenderKind::Reconstruction => {
            let id = need_id(args)?;
            let dataset = load_dataset(resolved)?;
            let model = load_trained_model(resolved)?;
            let series = find_series(&dataset, id)?;
            let reconstruction = model.reconstruct(series)?;
            let svg = render_reconstruction(series, &reconstruction)?;
            let path = renders.join(format!("reconstruction_{id}.svg"));
            write_svg(&mut log, &path, &svg)?;
        }
        RenderKind::Scatter => {
            let scatter = resolved.out_dir.join("scatter.csv");
            require(&scatter, "detect")?;
            let points = read_scatter_csv(&scatter)?;
            let svg = render_scatter(&points)?;
            write_svg(&mut log, &renders.join("scatter.svg"), &svg)?;
        }
        RenderKind::Boxplot => {
            let report_path = resolved.out_dir.join("qm_report.json");
            require(&report_path, "qm")?;
            let report: QmReport = read_json(&report_path)?;
            let svg = render_qm_boxplot(&report.summary)?;
            write_svg(&mut log, &renders.join("qm_boxplot.svg"), &svg)?;
        }
    }
    log.finish(resolved, "render")?;
    Ok(())
}
