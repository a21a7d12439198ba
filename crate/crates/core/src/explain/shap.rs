//! Shapley-value explanations over segments: exact enumeration for small
//! segment counts, KernelSHAP weighted least squares otherwise. The value
//! function replaces out-of-coalition segments with the interpolation
//! background, so v(empty) is the fully interpolated series.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::explain::segments::{masked_replacement, Segmentation};
use crate::explain::types::{Explanation, Method, Target};
use crate::seed::rng_from;
use crate::series::TimeSeries;

/// Exact mode is capped here: 2^m coalition evaluations.
pub const EXACT_SEGMENT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShapMode {
    Exact,
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapConfig {
    pub segments: usize,
    pub mode: ShapMode,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig { segments: 64, mode: ShapMode::Sampled { samples: 2048 }, seed: 0 }
    }
}

impl ShapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments < 2 {
            return Err(Error::Parameter("shap needs at least 2 segments".into()));
        }
        match self.mode {
            ShapMode::Exact if self.segments > EXACT_SEGMENT_LIMIT => Err(Error::Parameter(format!(
                "exact shapley enumeration is capped at {EXACT_SEGMENT_LIMIT} segments, got {}",
                self.segments
            ))),
            ShapMode::Sampled { samples } if samples < self.segments => Err(Error::Parameter(
                format!("shap needs samples >= segments ({samples} < {})", self.segments),
            )),
            _ => Ok(()),
        }
    }
}

fn bits_of(index: usize, m: usize) -> Vec<bool> {
    (0..m).map(|j| index & (1 << j) != 0).collect()
}

/// Exact Shapley values from a full table of coalition values indexed by
/// bitmask (bit j set = player j present).
pub fn exact_shapley_from_table(m: usize, values: &[f64]) -> Result<Vec<f64>> {
    if m == 0 || m > EXACT_SEGMENT_LIMIT {
        return Err(Error::Parameter(format!(
            "exact shapley supports 1..={EXACT_SEGMENT_LIMIT} players, got {m}"
        )));
    }
    if values.len() != 1 << m {
        return Err(Error::Dimension(format!(
            "coalition table has {} entries, expected {}",
            values.len(),
            1 << m
        )));
    }
    let factorial: Vec<f64> = (0..=m)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut phi = vec![0.0; m];
    for (s, &v_s) in values.iter().enumerate() {
        let k = s.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if s & (1 << j) != 0 {
                continue;
            }
            let weight = factorial[k] * factorial[m - k - 1] / factorial[m];
            *p += weight * (values[s | (1 << j)] - v_s);
        }
    }
    Ok(phi)
}

/// Exact Shapley values for an arbitrary value function over m players.
pub fn exact_shapley<F: FnMut(&[bool]) -> f64>(m: usize, mut v: F) -> Result<Vec<f64>> {
    if m == 0 || m > EXACT_SEGMENT_LIMIT {
        return Err(Error::Parameter(format!(
            "exact shapley supports 1..={EXACT_SEGMENT_LIMIT} players, got {m}"
        )));
    }
    let table: Vec<f64> = (0..1usize << m).map(|s| v(&bits_of(s, m))).collect();
    exact_shapley_from_table(m, &table)
}

/// KernelSHAP with sampled coalitions: coalition sizes are drawn uniformly
/// from 1..m, members uniformly per size, and each row is importance-
/// weighted back to the Shapley kernel pi(z) = (m-1)/(C(m,|z|)|z|(m-|z|)).
/// The efficiency constraint is enforced by eliminating the last player.
pub fn sampled_kernel_shap<F: FnMut(&[bool]) -> f64>(
    m: usize,
    mut v: F,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::Parameter("sampled kernel shap needs at least 2 players".into()));
    }
    if samples < m {
        return Err(Error::Parameter(format!(
            "sampled kernel shap needs samples >= players ({samples} < {m})"
        )));
    }
    let v_empty = v(&vec![false; m]);
    let v_full = v(&vec![true; m]);
    let delta = v_full - v_empty;

    let mut rng = rng_from(seed);
    let mut masks = Vec::with_capacity(samples);
    let mut weights = Vec::with_capacity(samples);
    for _ in 0..samples {
        let k = rng.gen_range(1..m);
        let chosen = rand::seq::index::sample(&mut rng, m, k);
        let mut mask = vec![false; m];
        for idx in chosen {
            mask[idx] = true;
        }
        // pi(z) / q(z) up to a constant factor: 1 / (|z| (m - |z|)).
        weights.push(1.0 / (k as f64 * (m - k) as f64));
        masks.push(mask);
    }

    let cols = m - 1;
    let mut xtwx = DMatrix::<f64>::zeros(cols, cols);
    let mut xtwy = DVector::<f64>::zeros(cols);
    for (mask, &w) in masks.iter().zip(&weights) {
        let z_last = f64::from(u8::from(mask[m - 1]));
        let y = v(mask) - v_empty - z_last * delta;
        let x: Vec<f64> = (0..cols).map(|j| f64::from(u8::from(mask[j])) - z_last).collect();
        for a in 0..cols {
            xtwy[a] += w * x[a] * y;
            for b in 0..cols {
                xtwx[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    let beta = xtwx.lu().solve(&xtwy).ok_or_else(|| {
        Error::Numerical("kernel shap least squares is singular; increase samples".into())
    })?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("kernel shap produced non-finite attributions".into()));
    }
    let mut phi: Vec<f64> = beta.iter().cloned().collect();
    let used: f64 = phi.iter().sum();
    phi.push(delta - used);
    Ok(phi)
}

/// Per-segment Shapley attributions of one latent dimension for a series.
pub fn shap_segments(
    model: &AEModel,
    values: &[f64],
    dim: usize,
    config: &ShapConfig,
) -> Result<Vec<f64>> {
    let per_dim = shap_segments_all_dims(model, values, config)?;
    per_dim.into_iter().nth(dim).ok_or_else(|| {
        Error::Parameter(format!("latent index {dim} out of range for latent_dim {}", model.latent_dim))
    })
}

/// Per-segment Shapley attributions for every latent dimension, sharing one
/// set of coalition evaluations across dimensions.
pub fn shap_segments_all_dims(
    model: &AEModel,
    values: &[f64],
    config: &ShapConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let segmentation = Segmentation::equal(values.len(), config.segments)?;
    let m = segmentation.count();
    let mut cache: std::collections::HashMap<Vec<bool>, Vec<f64>> = std::collections::HashMap::new();
    let mut evaluate = |mask: &[bool]| -> Result<Vec<f64>> {
        if let Some(hit) = cache.get(mask) {
            return Ok(hit.clone());
        }
        let perturbed = masked_replacement(values, &segmentation, mask)?;
        let latent = model.encode_values(&perturbed)?;
        cache.insert(mask.to_vec(), latent.clone());
        Ok(latent)
    };

    let mut per_dim = Vec::with_capacity(model.latent_dim);
    match config.mode {
        ShapMode::Exact => {
            let mut table = vec![Vec::new(); 1 << m];
            for (s, row) in table.iter_mut().enumerate() {
                *row = evaluate(&bits_of(s, m))?;
            }
            for dim in 0..model.latent_dim {
                let values_dim: Vec<f64> = table.iter().map(|l| l[dim]).collect();
                per_dim.push(exact_shapley_from_table(m, &values_dim)?);
            }
        }
        ShapMode::Sampled { samples } => {
            for dim in 0..model.latent_dim {
                // Same seed for every dimension so all fits share one
                // coalition sample (and the cache makes that sharing free).
                let mut failed = None;
                let phi = sampled_kernel_shap(
                    m,
                    |mask| match evaluate(mask) {
                        Ok(latent) => latent[dim],
                        Err(e) => {
                            failed = Some(e);
                            0.0
                        }
                    },
                    samples,
                    config.seed,
                )?;
                if let Some(e) = failed {
                    return Err(e);
                }
                per_dim.push(phi);
            }
        }
    }
    Ok(per_dim)
}

/// SHAP heatmap: segment attributions broadcast to time steps; combined
/// mode averages absolute attributions across latent dimensions.
pub fn shap(
    model: &AEModel,
    series: &TimeSeries,
    target: Target,
    config: &ShapConfig,
) -> Result<Explanation> {
    let segmentation = Segmentation::equal(series.values.len(), config.segments)?;
    let per_segment = match target {
        Target::Latent(i) => shap_segments(model, &series.values, i, config)?,
        Target::Combined => {
            let per_dim = shap_segments_all_dims(model, &series.values, config)?;
            let k = per_dim.len() as f64;
            (0..segmentation.count())
                .map(|s| per_dim.iter().map(|p| p[s].abs()).sum::<f64>() / k)
                .collect()
        }
    };
    let values = segmentation.broadcast(&per_segment)?;
    Explanation::new(&series.id, Method::Shap, target, values)
}
