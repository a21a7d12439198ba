//! Detection scoring against ground-truth labels, reported per class the
//! way anomaly-detection tables usually are (class 1 = NOK).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "f1-score")]
    pub f1: f64,
    pub support: usize,
    /// True when a zero denominator forced precision or recall to 0.0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(rename = "OK")]
    pub ok: ClassMetrics,
    #[serde(rename = "NOK")]
    pub nok: ClassMetrics,
    pub confusion: Confusion,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize, support: usize) -> ClassMetrics {
    let (precision, d1) = ratio(tp, tp + fp);
    let (recall, d2) = ratio(tp, tp + fn_);
    let (f1, d3) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    ClassMetrics { precision, recall, f1, support, degenerate: d1 || d2 || d3 }
}

/// Scores outlier flags against labels. A flag means "predicted NOK".
pub fn score(flags: &[bool], labels: &[Label]) -> Result<DetectionReport> {
    if flags.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} flags vs {} labels",
            flags.len(),
            labels.len()
        )));
    }
    let mut c = Confusion { true_positive: 0, false_positive: 0, true_negative: 0, false_negative: 0 };
    for (&flag, &label) in flags.iter().zip(labels) {
        match (flag, label) {
            (true, Label::Nok) => c.true_positive += 1,
            (true, Label::Ok) => c.false_positive += 1,
            (false, Label::Ok) => c.true_negative += 1,
            (false, Label::Nok) => c.false_negative += 1,
        }
    }
    let nok = class_metrics(
        c.true_positive,
        c.false_positive,
        c.false_negative,
        c.true_positive + c.false_negative,
    );
    // For the OK class, "positive" means predicted OK.
    let ok = class_metrics(
        c.true_negative,
        c.false_negative,
        c.false_positive,
        c.true_negative + c.false_positive,
    );
    let total = flags.len();
    let accuracy = if total == 0 {
        0.0
    } else {
        (c.true_positive + c.true_negative) as f64 / total as f64
    };
    Ok(DetectionReport { ok, nok, confusion: c, accuracy })
}
