//! 2D latent-space projection for scatter export: PCA via eigendecomposition
//! of the latent covariance matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::latent::detect::{detect, DetectConfig};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterTag {
    /// DBSCAN outlier.
    Outlier,
    /// Clustered but not a core point: near a cluster edge.
    OkDeviating,
    Ok,
}

impl ScatterTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScatterTag::Outlier => "outlier",
            ScatterTag::OkDeviating => "ok_deviating",
            ScatterTag::Ok => "ok",
        }
    }

    pub fn parse(s: &str) -> Result<ScatterTag> {
        match s {
            "outlier" => Ok(ScatterTag::Outlier),
            "ok_deviating" => Ok(ScatterTag::OkDeviating),
            "ok" => Ok(ScatterTag::Ok),
            other => Err(Error::Parse(format!(
                "unknown scatter tag '{other}' (expected ok, ok_deviating, or outlier)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub tag: ScatterTag,
}

/// Projects centered vectors onto their top-2 principal components.
/// Eigenvector signs are fixed so the largest-magnitude component is
/// positive, keeping the projection deterministic.
pub fn pca_2d(vectors: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    if vectors.is_empty() {
        return Ok(Vec::new());
    }
    let dim = vectors[0].len();
    if dim == 0 {
        return Err(Error::Dimension("cannot project zero-dimensional vectors".into()));
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|d| vectors.iter().map(|v| v[d]).sum::<f64>() / n)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for v in vectors {
        let c = DVector::from_iterator(dim, v.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &c * c.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    // Order components by descending eigenvalue; ties by index for
    // determinism.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let axis = |rank: usize| -> Vec<f64> {
        if rank >= dim {
            return vec![0.0; dim];
        }
        let col = eig.eigenvectors.column(order[rank]);
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap().then(b.0.cmp(&a.0)))
            .map(|(_, v)| *v)
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        col.iter().map(|v| v * sign).collect()
    };
    let ax = axis(0);
    let ay = axis(1);
    Ok(vectors
        .iter()
        .map(|v| {
            let cx: f64 = v.iter().zip(&mean).zip(&ax).map(|((x, m), a)| (x - m) * a).sum();
            let cy: f64 = v.iter().zip(&mean).zip(&ay).map(|((x, m), a)| (x - m) * a).sum();
            (cx, cy)
        })
        .collect())
}

/// Runs detection, projects the latents to 2D, and tags each instance.
pub fn latent_scatter(
    model: &AEModel,
    dataset: &[TimeSeries],
    config: &DetectConfig,
) -> Result<Vec<ScatterPoint>> {
    let detection = detect(model, dataset, config)?;
    let projected = pca_2d(&detection.latents)?;
    Ok(dataset
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
        .collect())
}
