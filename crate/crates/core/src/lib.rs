//! Latent-space outlier detection and explanation for univariate time series.
//!
//! The pipeline implemented here:
//!
//! 1. [`datagen`] produces a labeled synthetic corpus of fixed-length series.
//! 2. [`autoencoder`] trains a 1D convolutional autoencoder and exposes the
//!    encoder `E` so a series maps to a low-dimensional latent vector.
//! 3. [`latent`] clusters latent vectors with DBSCAN; points outside every
//!    cluster are whole-series outliers.
//! 4. [`explain`] attributes encoder outputs back to time steps with
//!    Grad-CAM, LIME, KernelSHAP, and epsilon-LRP heatmaps.
//! 5. [`ensemble`] fuses the per-method heatmaps into a single aggregated
//!    explanation (min-max scaling followed by a pointwise mean).
//! 6. [`quality`] scores explanations by comparing latent-space displacement
//!    under explanation-guided vs. random perturbation.
//!
//! All randomness flows from explicit seeds; repeated runs are bit-identical.

pub mod autoencoder;
pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod explain;
pub mod io;
pub mod latent;
pub mod nn;
pub mod quality;
pub mod render;
pub mod seed;
pub mod series;

pub use error::{Error, Result};
pub use series::{Label, TimeSeries};

/// Library version, recorded in pipeline run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
