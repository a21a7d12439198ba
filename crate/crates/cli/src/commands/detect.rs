//! `aee detect`: encode the dataset, cluster the latent codes, write flags,
//! latents, the 2D projection, and a detection summary.

use clap::Args;
use serde::{Deserialize, Serialize};

use aee_core::io::{write_detections_csv, write_json, write_latents_csv, write_scatter_csv};
use aee_core::latent::{detect, pca_2d, score, DetectionReport, ScatterPoint, ScatterTag};
use aee_core::Label;

use crate::commands::{load_dataset, load_trained_model};
use crate::config::{PipelineConfig, Resolved};
use crate::error::CliResult;
use crate::manifest::ArtifactLog;

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// DBSCAN radius; omit to pick one from the k-distance elbow.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    /// Z-score the latent dimensions before clustering.
    #[arg(long)]
    pub standardize: bool,
}

pub fn apply(args: &DetectArgs, config: &mut PipelineConfig) {
    if let Some(eps) = args.eps {
        config.dbscan.eps = Some(eps);
    }
    if let Some(min_pts) = args.min_pts {
        config.dbscan.min_pts = min_pts;
    }
    if args.standardize {
        config.dbscan.standardize = true;
    }
}

/// What `detect` learned about the corpus, written as
/// `detection_report.json`. `metrics` needs ground-truth labels and is
/// absent on unlabeled datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub eps_used: f64,
    pub min_pts: usize,
    pub cluster_count: usize,
    pub flagged: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<DetectionReport>,
}

pub fn run(resolved: &Resolved) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let dataset = load_dataset(resolved)?;
    let model = load_trained_model(resolved)?;
    let detection = detect(&model, &dataset, &resolved.config.dbscan)?;

    let detections_path = resolved.out_dir.join("detections.csv");
    write_detections_csv(&detections_path, &dataset, &detection)?;
    log.record(&detections_path);

    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    let latents_path = resolved.out_dir.join("latents.csv");
    write_latents_csv(&latents_path, &ids, &detection.latents)?;
    log.record(&latents_path);

    let projected = pca_2d(&detection.latents)?;
    let points: Vec<ScatterPoint> = dataset
        .iter()
        .zip(projected)
        .enumerate()
        .map(|(i, (series, (x, y)))| {
            let tag = if detection.flags[i] {
                ScatterTag::Outlier
            } else if !detection.assignment.core[i] {
                ScatterTag::OkDeviating
            } else {
                ScatterTag::Ok
            };
            ScatterPoint { id: series.id.clone(), x, y, tag }
        })
        .collect();
    let scatter_path = resolved.out_dir.join("scatter.csv");
    write_scatter_csv(&scatter_path, &points)?;
    log.record(&scatter_path);

    let labels: Option<Vec<Label>> = dataset.iter().map(|s| s.label).collect();
    let metrics = match labels {
        Some(labels) => Some(score(&detection.flags, &labels)?),
        None => {
            eprintln!("note: dataset has unlabeled series; skipping precision/recall");
            None
        }
    };
    let summary = DetectionSummary {
        eps_used: detection.eps_used,
        min_pts: detection.min_pts,
        cluster_count: detection.assignment.cluster_count,
        flagged: detection.flags.iter().filter(|&&f| f).count(),
        total: dataset.len(),
        metrics,
    };
    let report_path = resolved.out_dir.join("detection_report.json");
    write_json(&report_path, &summary)?;
    log.record(&report_path);

    log.finish(resolved, "detect")?;
    println!(
        "flagged {}/{} series (eps {:.6}, min_pts {}, {} clusters)",
        summary.flagged, summary.total, summary.eps_used, summary.min_pts, summary.cluster_count
    );
    if let Some(m) = &summary.metrics {
        println!(
            "NOK f1 {:.4} (precision {:.4}, recall {:.4}); OK f1 {:.4}; accuracy {:.4}",
            m.nok.f1, m.nok.precision, m.nok.recall, m.ok.f1, m.accuracy
        );
    }
    Ok(())
}
