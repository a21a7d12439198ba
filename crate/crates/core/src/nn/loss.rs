//! Reconstruction loss.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Mean squared error over all elements.
pub fn mse(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    if prediction.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "mse shapes differ: {:?} vs {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    if prediction.len() == 0 {
        return Err(Error::Dimension("mse on empty tensors".into()));
    }
    let sum: f64 = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / prediction.len() as f64)
}

/// Gradient of [`mse`] with respect to the prediction: `2 (p - t) / n`.
pub fn mse_grad(prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
    if prediction.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "mse shapes differ: {:?} vs {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.len() as f64;
    let data: Vec<f64> = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Tensor::from_vec(prediction.shape().to_vec(), data)
}
