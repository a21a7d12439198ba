//! `aee report`: one JSON + one markdown summary of whatever the pipeline
//! has produced so far, plus an index of every artifact on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use aee_core::io::{read_json, write_json};
use aee_core::quality::QmReport;
use aee_core::{Error, Label};

use crate::commands::detect::DetectionSummary;
use crate::commands::require;
use crate::config::Resolved;
use crate::error::CliResult;
use crate::manifest::ArtifactLog;

#[derive(Debug, Serialize)]
struct CorpusSection {
    size: usize,
    length: usize,
    n_ok: usize,
    n_nok: usize,
}

#[derive(Debug, Serialize)]
struct TrainingSection {
    epochs_run: u64,
    final_train_mse: f64,
    final_val_mse: f64,
    test_mse: f64,
}

#[derive(Debug, Serialize)]
struct OrderingRate {
    count: usize,
    satisfied: usize,
    rate: f64,
}

#[derive(Debug, Serialize)]
struct QmSection {
    fraction: f64,
    strategy: String,
    trials: usize,
    ok_evaluated: usize,
    nok_evaluated: usize,
    /// method -> label -> per-instance ordering satisfaction.
    ordering: BTreeMap<String, BTreeMap<String, OrderingRate>>,
    summary: Value,
}

#[derive(Debug, Serialize)]
struct ReportDoc {
    config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<CorpusSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    training: Option<TrainingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection: Option<DetectionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qm: Option<QmSection>,
    artifacts: Vec<String>,
}

fn read_if_present<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Option<T>> {
    if path.exists() {
        Ok(Some(read_json(path)?))
    } else {
        Ok(None)
    }
}

fn corpus_section(out_dir: &Path) -> CliResult<Option<CorpusSection>> {
    let value: Option<Value> = read_if_present(&out_dir.join("corpus_manifest.json"))?;
    Ok(value.map(|v| CorpusSection {
        size: v["config"]["size"].as_u64().unwrap_or(0) as usize,
        length: v["config"]["length"].as_u64().unwrap_or(0) as usize,
        n_ok: v["n_ok"].as_u64().unwrap_or(0) as usize,
        n_nok: v["n_nok"].as_u64().unwrap_or(0) as usize,
    }))
}

fn training_section(out_dir: &Path) -> CliResult<Option<TrainingSection>> {
    let value: Option<Value> = read_if_present(&out_dir.join("train_report.json"))?;
    Ok(value.map(|v| {
        let last = |key: &str| {
            v[key].as_array().and_then(|a| a.last()).and_then(Value::as_f64).unwrap_or(f64::NAN)
        };
        TrainingSection {
            epochs_run: v["epochs_run"].as_u64().unwrap_or(0),
            final_train_mse: last("train_mse"),
            final_val_mse: last("val_mse"),
            test_mse: v["test_mse"].as_f64().unwrap_or(f64::NAN),
        }
    }))
}

fn ordering_rates(report: &QmReport) -> BTreeMap<String, BTreeMap<String, OrderingRate>> {
    let mut counts: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in &report.results {
        let label = if r.label == Label::Nok { "NOK" } else { "OK" };
        let entry = counts.entry((r.method.to_string(), label.to_string())).or_default();
        entry.0 += 1;
        entry.1 += usize::from(r.ordering_satisfied);
    }
    let mut out: BTreeMap<String, BTreeMap<String, OrderingRate>> = BTreeMap::new();
    for ((method, label), (count, satisfied)) in counts {
        out.entry(method).or_default().insert(
            label,
            OrderingRate { count, satisfied, rate: satisfied as f64 / count as f64 },
        );
    }
    out
}

fn qm_section(out_dir: &Path) -> CliResult<Option<QmSection>> {
    let report: Option<QmReport> = read_if_present(&out_dir.join("qm_report.json"))?;
    match report {
        None => Ok(None),
        Some(report) => {
            let summary = serde_json::to_value(&report.summary).map_err(Error::from)?;
            Ok(Some(QmSection {
                fraction: report.fraction,
                strategy: report.strategy.as_str().to_string(),
                trials: report.trials,
                ok_evaluated: report.ok_evaluated,
                nok_evaluated: report.nok_evaluated,
                ordering: ordering_rates(&report),
                summary,
            }))
        }
    }
}

/// Sorted relative paths of everything under `out_dir` except run
/// manifests and the report files themselves, so rerunning the report is
/// byte-stable.
fn artifact_index(out_dir: &Path) -> CliResult<Vec<String>> {
    fn walk(dir: &Path, base: &Path, into: &mut Vec<String>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, base, into)?;
            } else if let Ok(rel) = path.strip_prefix(base) {
                into.push(rel.to_string_lossy().into_owned());
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(out_dir, out_dir, &mut paths).map_err(Error::from)?;
    paths.retain(|p| p != "report.json" && p != "report.md" && !p.starts_with("manifests/"));
    paths.sort();
    Ok(paths)
}

fn markdown(doc: &ReportDoc) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Run report\n");
    let _ = writeln!(md, "Config hash: `{}`\n", doc.config_hash);
    if let Some(c) = &doc.corpus {
        let _ = writeln!(md, "## Corpus\n");
        let _ = writeln!(
            md,
            "{} series of length {}: {} OK, {} NOK.\n",
            c.size, c.length, c.n_ok, c.n_nok
        );
    }
    if let Some(t) = &doc.training {
        let _ = writeln!(md, "## Training\n");
        let _ = writeln!(
            md,
            "{} epochs; final train MSE {:.6}, validation MSE {:.6}, test MSE {:.6}.\n",
            t.epochs_run, t.final_train_mse, t.final_val_mse, t.test_mse
        );
    }
    if let Some(d) = &doc.detection {
        let _ = writeln!(md, "## Detection\n");
        let _ = writeln!(
            md,
            "eps {:.6}, min_pts {}, {} clusters; flagged {}/{} series.\n",
            d.eps_used, d.min_pts, d.cluster_count, d.flagged, d.total
        );
        if let Some(m) = &d.metrics {
            let _ = writeln!(md, "| class | precision | recall | f1 | support |");
            let _ = writeln!(md, "|---|---|---|---|---|");
            for (name, c) in [("OK", &m.ok), ("NOK", &m.nok)] {
                let _ = writeln!(
                    md,
                    "| {name} | {:.4} | {:.4} | {:.4} | {} |",
                    c.precision, c.recall, c.f1, c.support
                );
            }
            let _ = writeln!(md, "\naccuracy {:.4}\n", m.accuracy);
        }
    }
    if let Some(q) = &doc.qm {
        let _ = writeln!(md, "## Explanation quality\n");
        let _ = writeln!(
            md,
            "fraction {}, strategy {}, trials {}; evaluated {} OK + {} NOK instances.\n",
            q.fraction, q.strategy, q.trials, q.ok_evaluated, q.nok_evaluated
        );
        let _ = writeln!(md, "Per-instance ordering d_self <= d_random <= d_xai:\n");
        let _ = writeln!(md, "| method | label | satisfied | rate |");
        let _ = writeln!(md, "|---|---|---|---|");
        for (method, labels) in &q.ordering {
            for (label, r) in labels {
                let _ = writeln!(
                    md,
                    "| {method} | {label} | {}/{} | {:.3} |",
                    r.satisfied, r.count, r.rate
                );
            }
        }
        let _ = writeln!(md, "\nNormalized distance summary:\n");
        let _ = writeln!(md, "| method | label | condition | count | q1 | median | q3 |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        if let Some(rows) = q.summary.as_array() {
            for row in rows {
                let stats = &row["stats"];
                let cell = |k: &str| {
                    stats[k].as_f64().map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
                };
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    row["method"].as_str().unwrap_or("?"),
                    if row["label"] == Value::from("Nok") { "NOK" } else { "OK" },
                    row["condition"].as_str().unwrap_or("?"),
                    row["count"],
                    cell("q1"),
                    cell("median"),
                    cell("q3")
                );
            }
        }
        let _ = writeln!(md);
    }
    let _ = writeln!(md, "## Artifacts\n");
    for a in &doc.artifacts {
        let _ = writeln!(md, "- {a}");
    }
    md
}

pub fn run(resolved: &Resolved) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let out_dir: &PathBuf = &resolved.out_dir;
    require(out_dir, "gen")?;

    let doc = ReportDoc {
        config_hash: resolved.config_hash.clone(),
        corpus: corpus_section(out_dir)?,
        training: training_section(out_dir)?,
        detection: read_if_present(&out_dir.join("detection_report.json"))?,
        qm: qm_section(out_dir)?,
        artifacts: artifact_index(out_dir)?,
    };

    let json_path = out_dir.join("report.json");
    write_json(&json_path, &doc)?;
    log.record(&json_path);

    let md_path = out_dir.join("report.md");
    fs::write(&md_path, markdown(&doc)).map_err(Error::from)?;
    log.record(&md_path);

    log.finish(resolved, "report")?;
    println!("wrote {} and {}", json_path.display(), md_path.display());
    Ok(())
}
