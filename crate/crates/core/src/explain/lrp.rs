//! Epsilon-rule layer-wise relevance propagation through the encoder.
//!
//! Relevance starts at one latent unit (seeded with its activation) and is
//! redistributed backwards proportionally to each input's share of the
//! pre-activation sum. Bias terms are excluded from the denominator, so to
//! within the epsilon stabilizer every linear layer conserves relevance;
//! pooling routes relevance winner-take-all and element-wise layers pass it
//! through unchanged.

use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::explain::types::{combine_mean_abs, Explanation, Method, Target};
use crate::nn::{Aux, Layer, Tensor, TraceStep};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrpConfig {
    /// Relative stabilizer: each layer uses epsilon times its mean absolute
    /// pre-activation sum, so the leak is scale-free.
    pub epsilon: f64,
}

impl Default for LrpConfig {
    fn default() -> Self {
        LrpConfig { epsilon: 1e-6 }
    }
}

impl LrpConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "lrp epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Stabilized denominator, or `None` when the pre-activation sum is exactly
/// zero (that unit's relevance is dropped rather than amplified).
fn stabilize(d: f64, eps: f64) -> Option<f64> {
    if d == 0.0 {
        None
    } else {
        Some(d + eps * d.signum())
    }
}

/// Layer-local stabilizer: relative epsilon scaled by the mean absolute
/// pre-activation sum, falling back to the absolute value when all sums
/// vanish (the fallback never matters: zero sums are dropped anyway).
fn layer_epsilon(epsilon: f64, sums: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for d in sums {
        total += d.abs();
        n += 1;
    }
    if n == 0 || total == 0.0 {
        epsilon
    } else {
        epsilon * total / n as f64
    }
}

fn propagate(layer: &Layer, step: &TraceStep, relevance: &Tensor, epsilon: f64) -> Result<Tensor> {
    match layer {
        Layer::Dense(dense) => {
            relevance.expect_shape(&[dense.out_dim], "lrp dense relevance")?;
            let x = step.input.data();
            let out = step.output.data();
            let r = relevance.data();
            let eps = layer_epsilon(epsilon, (0..dense.out_dim).map(|o| out[o] - dense.bias[o]));
            let mut r_in = vec![0.0; dense.in_dim];
            for o in 0..dense.out_dim {
                if r[o] == 0.0 {
                    continue;
                }
                let Some(denom) = stabilize(out[o] - dense.bias[o], eps) else {
                    continue;
                };
                let factor = r[o] / denom;
                let row = &dense.weights[o * dense.in_dim..(o + 1) * dense.in_dim];
                for (ri, (&w, &xi)) in r_in.iter_mut().zip(row.iter().zip(x)) {
                    *ri += factor * w * xi;
                }
            }
            Tensor::from_vec(vec![dense.in_dim], r_in)
        }
        Layer::Conv1d(conv) => {
            let len_in = step.input.length();
            let (len_out, pad_left) = conv.geometry(len_in)?;
            relevance.expect_shape(&[conv.out_channels, len_out], "lrp conv relevance")?;
            let eps = layer_epsilon(
                epsilon,
                (0..conv.out_channels).flat_map(|co| {
                    let out = step.output.channel(co);
                    let b = conv.bias[co];
                    out.iter().map(move |&z| z - b)
                }),
            );
            let mut r_in = vec![0.0; conv.in_channels * len_in];
            for co in 0..conv.out_channels {
                let out = step.output.channel(co);
                let r = relevance.channel(co);
                for (t, (&rk, &zk)) in r.iter().zip(out).enumerate() {
                    if rk == 0.0 {
                        continue;
                    }
                    let Some(denom) = stabilize(zk - conv.bias[co], eps) else {
                        continue;
                    };
                    let factor = rk / denom;
                    let start = (t * conv.stride) as isize - pad_left;
                    for ci in 0..conv.in_channels {
                        let x = step.input.channel(ci);
                        let dst = &mut r_in[ci * len_in..(ci + 1) * len_in];
                        for k in 0..conv.kernel_size {
                            let p = start + k as isize;
                            if p >= 0 && (p as usize) < len_in {
                                let p = p as usize;
                                dst[p] += factor * conv.weight_at(co, ci, k) * x[p];
                            }
                        }
                    }
                }
            }
            Tensor::from_vec(vec![conv.in_channels, len_in], r_in)
        }
        Layer::MaxPool1d { .. } => {
            let Aux::PoolArgmax(argmax) = &step.aux else {
                return Err(Error::State("pooling trace step is missing its argmax record".into()));
            };
            let mut r_in = vec![0.0; step.input.data().len()];
            for (&src, &r) in argmax.iter().zip(relevance.data()) {
                r_in[src] += r;
            }
            Tensor::from_vec(step.input.shape().to_vec(), r_in)
        }
        Layer::Upsample1d { factor } => {
            let channels = step.input.channels();
            let len_in = step.input.length();
            let mut r_in = vec![0.0; channels * len_in];
            for c in 0..channels {
                let r = relevance.channel(c);
                let dst = &mut r_in[c * len_in..(c + 1) * len_in];
                for (i, ri) in dst.iter_mut().enumerate() {
                    *ri = r[i * factor..(i + 1) * factor].iter().sum();
                }
            }
            Tensor::from_vec(vec![channels, len_in], r_in)
        }
        // Element-wise and shape-only layers keep relevance as is.
        Layer::Activation(_) | Layer::Dropout { .. } => Ok(relevance.clone()),
        Layer::Flatten | Layer::Reshape { .. } => {
            Tensor::from_vec(step.input.shape().to_vec(), relevance.data().to_vec())
        }
    }
}

/// Relevance of each input position for one latent unit.
pub fn lrp_unit_relevance(
    model: &AEModel,
    values: &[f64],
    unit: usize,
    config: &LrpConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if unit >= model.latent_dim {
        return Err(Error::Parameter(format!(
            "latent index {unit} out of range for latent_dim {}",
            model.latent_dim
        )));
    }
    let trace = model.encode_trace(values)?;
    let latent = trace.output()?;
    let mut seed = vec![0.0; latent.data().len()];
    seed[unit] = latent.data()[unit];
    let mut relevance = Tensor::from_vec(latent.shape().to_vec(), seed)?;
    for (layer, step) in model.encoder.layers.iter().zip(&trace.steps).rev() {
        relevance = propagate(layer, step, &relevance, config.epsilon)?;
    }
    Ok(relevance.into_data())
}

/// Relevance heatmap; combined mode averages absolute per-unit relevance.
pub fn lrp(
    model: &AEModel,
    series: &TimeSeries,
    target: Target,
    config: &LrpConfig,
) -> Result<Explanation> {
    match target {
        Target::Latent(i) => {
            let values = lrp_unit_relevance(model, &series.values, i, config)?;
            Explanation::new(&series.id, Method::Lrp, target, values)
        }
        Target::Combined => {
            let per_unit: Vec<Explanation> = (0..model.latent_dim)
                .map(|i| {
                    let values = lrp_unit_relevance(model, &series.values, i, config)?;
                    Explanation::new(&series.id, Method::Lrp, Target::Latent(i), values)
                })
                .collect::<Result<_>>()?;
            combine_mean_abs(&series.id, Method::Lrp, &per_unit)
        }
    }
}
