//! Whole-series outlier detection: encode everything, cluster the latent
//! codes, flag what no cluster absorbs.

use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::latent::dbscan::{dbscan, euclidean, ClusterAssignment};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Radius for DBSCAN; when absent the k-distance elbow picks one.
    pub eps: Option<f64>,
    pub min_pts: usize,
    /// Z-score the latent dimensions before clustering.
    pub standardize: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { eps: None, min_pts: 5, standardize: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub flags: Vec<bool>,
    pub assignment: ClusterAssignment,
    pub latents: Vec<Vec<f64>>,
    pub eps_used: f64,
    pub min_pts: usize,
}

/// Ascending list of each point's distance to its k-th nearest *other*
/// point; the profile whose elbow suggests eps.
pub fn k_distance_profile(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k >= points.len() {
        return Err(Error::Parameter(format!(
            "k must be in 1..{} (number of points - 1), got {k}",
            points.len()
        )));
    }
    let mut profile: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut dists: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| euclidean(p, q))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists[k - 1]
        })
        .collect();
    profile.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(profile)
}

/// Elbow of an ascending profile: the point with maximum perpendicular
/// distance to the chord between the first and last profile values.
pub fn elbow_eps(profile: &[f64]) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::Parameter("empty k-distance profile".into()));
    }
    let n = profile.len();
    let (x0, y0) = (0.0, profile[0]);
    let (x1, y1) = ((n - 1) as f64, profile[n - 1]);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let norm = (dx * dx + dy * dy).sqrt();
    let mut best = (0usize, -1.0f64);
    for (i, &y) in profile.iter().enumerate() {
        let d = if norm == 0.0 {
            0.0
        } else {
            ((i as f64 - x0) * dy - (y - y0) * dx).abs() / norm
        };
        if d > best.1 {
            best = (i, d);
        }
    }
    let eps = profile[best.0];
    if !(eps > 0.0) {
        return Err(Error::Numerical(
            "k-distance elbow is not positive; supply eps explicitly".into(),
        ));
    }
    Ok(eps)
}

fn standardize(latents: &mut [Vec<f64>]) {
    if latents.is_empty() {
        return;
    }
    let dim = latents[0].len();
    let n = latents.len() as f64;
    for d in 0..dim {
        let mean: f64 = latents.iter().map(|l| l[d]).sum::<f64>() / n;
        let var: f64 = latents.iter().map(|l| (l[d] - mean) * (l[d] - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 {
            for l in latents.iter_mut() {
                l[d] = (l[d] - mean) / sd;
            }
        } else {
            for l in latents.iter_mut() {
                l[d] = 0.0;
            }
        }
    }
}

/// Encodes the dataset and labels each series outlier / clustered.
pub fn detect(model: &AEModel, dataset: &[TimeSeries], config: &DetectConfig) -> Result<Detection> {
    if dataset.is_empty() {
        return Ok(Detection {
            flags: Vec::new(),
            assignment: ClusterAssignment { labels: Vec::new(), core: Vec::new(), cluster_count: 0 },
            latents: Vec::new(),
            eps_used: config.eps.unwrap_or(0.0),
            min_pts: config.min_pts,
        });
    }
    let mut latents = dataset
        .iter()
        .map(|s| model.encode(s))
        .collect::<Result<Vec<_>>>()?;
    if config.standardize {
        standardize(&mut latents);
    }
    let eps = match config.eps {
        Some(e) => e,
        None => {
            let k = config.min_pts.min(latents.len().saturating_sub(1)).max(1);
            elbow_eps(&k_distance_profile(&latents, k)?)?
        }
    };
    let assignment = dbscan(&latents, eps, config.min_pts)?;
    let flags = assignment.labels.iter().map(|l| l.is_outlier()).collect();
    Ok(Detection { flags, assignment, latents, eps_used: eps, min_pts: config.min_pts })
}
