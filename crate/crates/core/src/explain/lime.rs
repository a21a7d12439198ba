//! LIME for the encoder: random segment masks, interpolation replacement,
//! and a locality-weighted ridge surrogate per latent dimension.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::explain::segments::{masked_replacement, Segmentation};
use crate::explain::types::{Explanation, Method, Target};
use crate::seed::rng_from;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimeConfig {
    pub segments: usize,
    pub samples: usize,
    /// Kernel width for exp(-d^2 / width^2) over cosine distance to the
    /// unmasked instance.
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            segments: 64,
            samples: 512,
            kernel_width: 0.25,
            ridge_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments < 2 {
            return Err(Error::Parameter("lime needs at least 2 segments".into()));
        }
        if self.samples < self.segments {
            return Err(Error::Parameter(format!(
                "lime needs samples >= segments ({} < {})",
                self.samples, self.segments
            )));
        }
        if !(self.kernel_width > 0.0) {
            return Err(Error::Parameter("lime kernel width must be positive".into()));
        }
        if self.ridge_lambda < 0.0 {
            return Err(Error::Parameter("lime ridge lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Cosine distance between a binary mask and the all-ones mask: for k of m
/// active bits this is 1 - sqrt(k/m); an empty mask is at distance 1.
pub fn mask_cosine_distance(mask: &[bool]) -> f64 {
    let m = mask.len() as f64;
    let k = mask.iter().filter(|&&b| b).count() as f64;
    if k == 0.0 {
        return 1.0;
    }
    1.0 - (k / m).sqrt()
}

/// Weighted ridge with an unpenalized intercept. Returns the segment
/// coefficients (intercept dropped). On singular normal equations the
/// penalty is raised once before giving up.
fn ridge_fit(
    design: &DMatrix<f64>,
    weights: &[f64],
    targets: &DVector<f64>,
    lambda: f64,
) -> Result<Vec<f64>> {
    let cols = design.ncols();
    let solve_with = |lambda: f64| -> Option<DVector<f64>> {
        let mut xtwx = DMatrix::<f64>::zeros(cols, cols);
        let mut xtwy = DVector::<f64>::zeros(cols);
        for (row, (&w, &y)) in weights.iter().zip(targets.iter()).enumerate() {
            let x = design.row(row);
            for a in 0..cols {
                xtwy[a] += w * x[a] * y;
                for b in 0..cols {
                    xtwx[(a, b)] += w * x[a] * x[b];
                }
            }
        }
        // The intercept occupies the last column and stays unpenalized.
        for a in 0..cols - 1 {
            xtwx[(a, a)] += lambda;
        }
        xtwx.lu().solve(&xtwy)
    };
    let beta = match solve_with(lambda) {
        Some(beta) if beta.iter().all(|v| v.is_finite()) => beta,
        _ => {
            let bumped = if lambda > 0.0 { lambda * 10.0 } else { 1e-6 };
            match solve_with(bumped) {
                Some(beta) if beta.iter().all(|v| v.is_finite()) => beta,
                _ => {
                    return Err(Error::Numerical(
                        "lime normal equations are singular even after raising the ridge penalty"
                            .into(),
                    ))
                }
            }
        }
    };
    Ok(beta.iter().take(cols - 1).cloned().collect())
}

struct LimeFit {
    /// Per-latent-dimension segment coefficients.
    per_dim: Vec<Vec<f64>>,
    segmentation: Segmentation,
}

fn fit(model: &AEModel, values: &[f64], config: &LimeConfig) -> Result<LimeFit> {
    config.validate()?;
    let segmentation = Segmentation::equal(values.len(), config.segments)?;
    let m = segmentation.count();
    let mut rng = rng_from(config.seed);

    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(config.samples);
    masks.push(vec![true; m]);
    for _ in 1..config.samples {
        masks.push((0..m).map(|_| rng.gen::<bool>()).collect());
    }

    let mut design = DMatrix::<f64>::zeros(config.samples, m + 1);
    let mut weights = Vec::with_capacity(config.samples);
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(config.samples);
    for (row, mask) in masks.iter().enumerate() {
        for (col, &bit) in mask.iter().enumerate() {
            design[(row, col)] = f64::from(u8::from(bit));
        }
        design[(row, m)] = 1.0;
        let d = mask_cosine_distance(mask);
        weights.push((-d * d / (config.kernel_width * config.kernel_width)).exp());
        let perturbed = masked_replacement(values, &segmentation, mask)?;
        outputs.push(model.encode_values(&perturbed)?);
    }

    let per_dim = (0..model.latent_dim)
        .map(|dim| {
            let y = DVector::from_iterator(config.samples, outputs.iter().map(|o| o[dim]));
            ridge_fit(&design, &weights, &y, config.ridge_lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimeFit { per_dim, segmentation })
}

/// LIME heatmap: segment coefficients of the local surrogate broadcast to
/// time steps. Combined mode averages absolute coefficients across latent
/// dimensions, mirroring the shared combined-mode rule.
pub fn lime(
    model: &AEModel,
    series: &TimeSeries,
    target: Target,
    config: &LimeConfig,
) -> Result<Explanation> {
    let fitted = fit(model, &series.values, config)?;
    let coefficients = match target {
        Target::Latent(i) => fitted
            .per_dim
            .get(i)
            .cloned()
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "latent index {i} out of range for latent_dim {}",
                    model.latent_dim
                ))
            })?,
        Target::Combined => {
            let m = fitted.segmentation.count();
            let k = fitted.per_dim.len() as f64;
            (0..m)
                .map(|s| fitted.per_dim.iter().map(|c| c[s].abs()).sum::<f64>() / k)
                .collect()
        }
    };
    let values = fitted.segmentation.broadcast(&coefficients)?;
    Explanation::new(&series.id, Method::Lime, target, values)
}
