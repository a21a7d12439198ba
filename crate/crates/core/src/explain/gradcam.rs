//! Grad-CAM for the encoder: gradient-weighted activation of the last
//! convolutional layer, ReLU-ed and stretched to the input length.

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::explain::types::{Explanation, Method, Target};
use crate::nn::Tensor;
use crate::series::TimeSeries;

/// Linear interpolation of a sequence onto `target_len` points, endpoints
/// aligned.
pub fn interpolate_linear(values: &[f64], target_len: usize) -> Vec<f64> {
    if values.is_empty() || target_len == 0 {
        return vec![0.0; target_len];
    }
    if values.len() == 1 {
        return vec![values[0]; target_len];
    }
    if target_len == 1 {
        return vec![values[0]];
    }
    let scale = (values.len() - 1) as f64 / (target_len - 1) as f64;
    (0..target_len)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(values.len() - 1);
            let frac = pos - lo as f64;
            values[lo] * (1.0 - frac) + values[hi] * frac
        })
        .collect()
}

fn cam_for_latent(model: &AEModel, values: &[f64], latent_index: usize) -> Result<Vec<f64>> {
    let conv_idx = model
        .encoder
        .last_conv_index()
        .ok_or_else(|| Error::State("encoder has no convolutional layer".into()))?;
    let trace = model.encode_trace(values)?;
    let feature_maps = &trace.steps[conv_idx].output;
    let latent = trace.output()?;
    if latent_index >= latent.len() {
        return Err(Error::Parameter(format!(
            "latent index {latent_index} out of range for latent_dim {}",
            latent.len()
        )));
    }
    let mut upstream = vec![0.0; latent.len()];
    upstream[latent_index] = 1.0;
    let upstream = Tensor::from_vec(latent.shape().to_vec(), upstream)?;
    let grads = model.encoder.backward_to(&trace, &upstream, conv_idx)?;

    let channels = feature_maps.channels();
    let len = feature_maps.length();
    let mut cam = vec![0.0; len];
    for c in 0..channels {
        let g = grads.channel(c);
        let weight: f64 = g.iter().sum::<f64>() / len as f64;
        for (slot, &a) in cam.iter_mut().zip(feature_maps.channel(c)) {
            *slot += weight * a;
        }
    }
    for v in cam.iter_mut() {
        *v = v.max(0.0);
    }
    Ok(interpolate_linear(&cam, model.input_length))
}

/// Grad-CAM heatmap toward one latent unit, or the mean of all per-unit
/// maps in combined mode (the maps are already nonnegative).
pub fn gradcam(model: &AEModel, series: &TimeSeries, target: Target) -> Result<Explanation> {
    let values = match target {
        Target::Latent(i) => cam_for_latent(model, &series.values, i)?,
        Target::Combined => {
            let mut acc = vec![0.0; model.input_length];
            for i in 0..model.latent_dim {
                let cam = cam_for_latent(model, &series.values, i)?;
                for (a, c) in acc.iter_mut().zip(&cam) {
                    *a += c;
                }
            }
            let k = model.latent_dim as f64;
            acc.iter_mut().for_each(|v| *v /= k);
            acc
        }
    };
    Explanation::new(&series.id, Method::Gradcam, target, values)
}
