//! Artifact readers and writers. Two dataset encodings: NDJSON (one
//! `{"id", "values", "label"}` object per line, label 0/1 and optional) and
//! headerless CSV (one series per row, optional trailing 0/1 label column,
//! ids synthesized on read). All writers emit bytes that depend only on the
//! data, so same-seed pipeline runs produce identical files.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::latent::{ClusterLabel, Detection, ScatterPoint, ScatterTag};
use crate::quality::{QmResult, QmSummaryRow};
use crate::series::{Label, TimeSeries};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct SeriesRecord {
    id: String,
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

pub fn write_dataset_ndjson(path: &Path, dataset: &[TimeSeries]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    for series in dataset {
        let record = SeriesRecord {
            id: series.id.clone(),
            values: series.values.clone(),
            label: series.label.map(Label::as_flag),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| Error::Parse(format!("cannot serialize series `{}`: {e}", series.id)))?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_dataset_ndjson(path: &Path) -> Result<Vec<TimeSeries>> {
    let file = fs::File::open(path)?;
    let mut dataset = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SeriesRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), lineno + 1)))?;
        let label = record.label.map(Label::from_flag).transpose()?;
        dataset.push(TimeSeries { id: record.id, values: record.values, label });
    }
    Ok(dataset)
}

/// One series per row; with `include_labels` a trailing 0/1 column is added
/// and every series must be labeled.
pub fn write_dataset_csv(path: &Path, dataset: &[TimeSeries], include_labels: bool) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for series in dataset {
        let mut row: Vec<String> = series.values.iter().map(|v| format_float(*v)).collect();
        if include_labels {
            let label = series.label.ok_or_else(|| {
                Error::Data(format!("series `{}` has no label for the label column", series.id))
            })?;
            row.push(label.as_flag().to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Reads a headerless CSV dataset; ids are synthesized as `r00000`, ... in
/// row order since the format carries none.
pub fn read_dataset_csv(path: &Path, has_labels: bool) -> Result<Vec<TimeSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut dataset = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut fields: Vec<&str> = record.iter().collect();
        let label = if has_labels {
            let raw = fields.pop().ok_or_else(|| {
                Error::Parse(format!("{} row {}: empty row", path.display(), i + 1))
            })?;
            let flag: u8 = raw.trim().parse().map_err(|_| {
                Error::Data(format!("{} row {}: label must be 0 or 1, got `{raw}`", path.display(), i + 1))
            })?;
            Some(Label::from_flag(flag)?)
        } else {
            None
        };
        let values = fields
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{} row {}: bad number `{f}`", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        dataset.push(TimeSeries { id: format!("r{i:05}"), values, label });
    }
    Ok(dataset)
}

/// Shortest-roundtrip float text (matches serde_json's float encoding).
fn format_float(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

pub fn write_explanation_csv(path: &Path, explanation: &Explanation) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["index", "value"])?;
    for (i, v) in explanation.values.iter().enumerate() {
        writer.write_record([i.to_string(), format_float(*v)])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

pub fn write_explanations_ndjson(path: &Path, explanations: &[Explanation]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    for e in explanations {
        serde_json::to_writer(&mut out, e)
            .map_err(|err| Error::Parse(format!("cannot serialize explanation: {err}")))?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_explanations_ndjson(path: &Path) -> Result<Vec<Explanation>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Explanation = serde_json::from_str(&line)
            .map_err(|err| Error::Parse(format!("{} line {}: {err}", path.display(), lineno + 1)))?;
        out.push(e);
    }
    Ok(out)
}

/// Latent coordinates, one row per series: id, then one column per latent
/// dimension.
pub fn write_latents_csv(path: &Path, ids: &[String], latents: &[Vec<f64>]) -> Result<()> {
    if ids.len() != latents.len() {
        return Err(Error::Dimension(format!(
            "{} ids vs {} latent vectors",
            ids.len(),
            latents.len()
        )));
    }
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    let dim = latents.first().map(Vec::len).unwrap_or(0);
    let mut header = vec!["id".to_string()];
    header.extend((0..dim).map(|i| format!("z{i}")));
    writer.write_record(&header)?;
    for (id, z) in ids.iter().zip(latents) {
        let mut row = vec![id.clone()];
        row.extend(z.iter().map(|v| format_float(*v)));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Per-series detection outcome: flagged 0/1, cluster index (-1 = outlier),
/// core-point flag, and the true label when known.
pub fn write_detections_csv(path: &Path, dataset: &[TimeSeries], detection: &Detection) -> Result<()> {
    if dataset.len() != detection.flags.len() {
        return Err(Error::Dimension(format!(
            "{} series vs {} detection flags",
            dataset.len(),
            detection.flags.len()
        )));
    }
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "flagged", "cluster", "core", "label"])?;
    for (i, series) in dataset.iter().enumerate() {
        let cluster = match detection.assignment.labels[i] {
            ClusterLabel::Cluster(c) => c as i64,
            ClusterLabel::Outlier => -1,
        };
        writer.write_record([
            series.id.clone(),
            u8::from(detection.flags[i]).to_string(),
            cluster.to_string(),
            u8::from(detection.assignment.core[i]).to_string(),
            series.label.map(|l| l.as_flag().to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// One row of a detections CSV, as written by [`write_detections_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub id: String,
    pub flagged: bool,
    /// Cluster index; -1 means outlier.
    pub cluster: i64,
    pub core: bool,
    pub label: Option<Label>,
}

pub fn read_detections_csv(path: &Path) -> Result<Vec<DetectionRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2; // header is line 1
        let field = |idx: usize, name: &str| -> Result<String> {
            record
                .get(idx)
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("{path:?} line {line}: missing {name}")))
        };
        let bool_field = |raw: &str, name: &str| match raw {
            "0" => Ok(false),
            "1" => Ok(true),
            other => {
                Err(Error::Parse(format!("{path:?} line {line}: {name} '{other}' is not 0 or 1")))
            }
        };
        let cluster: i64 = field(2, "cluster")?.parse().map_err(|_| {
            Error::Parse(format!("{path:?} line {line}: cluster is not an integer"))
        })?;
        let label_raw = field(4, "label")?;
        let label = if label_raw.is_empty() {
            None
        } else {
            Some(Label::from_flag(bool_field(&label_raw, "label")? as u8)?)
        };
        rows.push(DetectionRow {
            id: field(0, "id")?,
            flagged: bool_field(&field(1, "flagged")?, "flagged")?,
            cluster,
            core: bool_field(&field(3, "core")?, "core")?,
            label,
        });
    }
    Ok(rows)
}

pub fn write_scatter_csv(path: &Path, points: &[ScatterPoint]) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "x", "y", "tag"])?;
    for p in points {
        writer.write_record([p.id.clone(), format_float(p.x), format_float(p.y), p.tag.as_str().to_string()])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterPoint>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 4 {
            return Err(Error::Parse(format!(
                "{path:?} line {line}: expected 4 fields, got {}",
                record.len()
            )));
        }
        let coord = |idx: usize, name: &str| -> Result<f64> {
            record[idx].parse().map_err(|_| {
                Error::Parse(format!("{path:?} line {line}: {name} is not a number"))
            })
        };
        points.push(ScatterPoint {
            id: record[0].to_string(),
            x: coord(1, "x")?,
            y: coord(2, "y")?,
            tag: ScatterTag::parse(&record[3])?,
        });
    }
    Ok(points)
}

pub fn write_qm_results_csv(path: &Path, results: &[QmResult]) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "series_id",
        "method",
        "label",
        "d_self",
        "d_random",
        "d_xai",
        "ordering_satisfied",
        "degenerate_selection",
    ])?;
    for r in results {
        writer.write_record([
            r.series_id.clone(),
            r.method.as_str().to_string(),
            r.label.as_flag().to_string(),
            format_float(r.d_self),
            format_float(r.d_random),
            format_float(r.d_xai),
            u8::from(r.ordering_satisfied).to_string(),
            u8::from(r.degenerate_selection).to_string(),
        ])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

pub fn write_qm_summary_csv(path: &Path, rows: &[QmSummaryRow]) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "method",
        "label",
        "condition",
        "count",
        "q1",
        "median",
        "q3",
        "lower_fence",
        "upper_fence",
    ])?;
    for row in rows {
        let stat = |f: fn(&crate::quality::IqrStats) -> f64| {
            row.stats.as_ref().map(|s| format_float(f(s))).unwrap_or_default()
        };
        writer.write_record([
            row.method.as_str().to_string(),
            row.label.as_flag().to_string(),
            row.condition.as_str().to_string(),
            row.count.to_string(),
            stat(|s| s.q1),
            stat(|s| s.median),
            stat(|s| s.q3),
            stat(|s| s.lower_fence),
            stat(|s| s.upper_fence),
        ])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}
