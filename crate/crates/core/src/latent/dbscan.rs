//! DBSCAN over latent vectors with deterministic scan order.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Per-point result: cluster id (contiguous from 0 in discovery order) or
/// outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    Cluster(usize),
    Outlier,
}

impl ClusterLabel {
    pub fn is_outlier(self) -> bool {
        matches!(self, ClusterLabel::Outlier)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<ClusterLabel>,
    /// Core-point flags; border points belong to a cluster but are not core.
    pub core: Vec<bool>,
    pub cluster_count: usize,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn neighbors_of(points: &[Vec<f64>], i: usize, eps: f64) -> Vec<usize> {
    // eps-inclusive and self-counting, so a point always has >= 1 neighbor.
    (0..points.len())
        .filter(|&j| euclidean(&points[i], &points[j]) <= eps)
        .collect()
}

/// Classic DBSCAN: core points have at least `min_pts` neighbors within
/// `eps` (inclusive, self counted); clusters grow by FIFO expansion from
/// the first core point found in index order; border points keep the first
/// cluster that reaches them.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    if points.is_empty() {
        return Err(Error::Parameter("dbscan needs at least one point".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter(format!("eps must be positive and finite, got {eps}")));
    }
    if min_pts < 1 {
        return Err(Error::Parameter("min_pts must be >= 1".into()));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Dimension(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("point {i} contains non-finite values")));
        }
    }

    let n = points.len();
    // None = unvisited, Some(Outlier) = tentative noise (may be relabeled
    // as a border point later), Some(Cluster(_)) = final.
    let mut labels: Vec<Option<ClusterLabel>> = vec![None; n];
    let mut core = vec![false; n];
    let mut cluster_count = 0;

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let neigh = neighbors_of(points, i, eps);
        if neigh.len() < min_pts {
            labels[i] = Some(ClusterLabel::Outlier);
            continue;
        }
        let id = cluster_count;
        cluster_count += 1;
        core[i] = true;
        labels[i] = Some(ClusterLabel::Cluster(id));
        let mut queue: VecDeque<usize> = neigh.into_iter().filter(|&j| j != i).collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == Some(ClusterLabel::Outlier) {
                // Border point: density-reachable but not core.
                labels[j] = Some(ClusterLabel::Cluster(id));
                continue;
            }
            if labels[j].is_some() {
                continue;
            }
            labels[j] = Some(ClusterLabel::Cluster(id));
            let jn = neighbors_of(points, j, eps);
            if jn.len() >= min_pts {
                core[j] = true;
                queue.extend(jn.into_iter().filter(|&k| labels[k].is_none() || labels[k] == Some(ClusterLabel::Outlier)));
            }
        }
    }

    Ok(ClusterAssignment {
        labels: labels.into_iter().map(Option::unwrap).collect(),
        core,
        cluster_count,
    })
}
