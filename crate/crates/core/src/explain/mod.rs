//! Attribution methods for the encoder: gradient-weighted activation maps,
//! local surrogate fits, Shapley values, relevance propagation, and the
//! ensemble that aggregates them. All methods produce one attribution per
//! input time step for either a single latent unit or a combined target.

pub mod gradcam;
pub mod lime;
pub mod lrp;
pub mod segments;
pub mod shap;
pub mod types;

pub use gradcam::{gradcam, interpolate_linear};
pub use lime::{lime, LimeConfig};
pub use lrp::{lrp, lrp_unit_relevance, LrpConfig};
pub use segments::{masked_replacement, Segmentation};
pub use shap::{
    exact_shapley, exact_shapley_from_table, sampled_kernel_shap, shap, ShapConfig, ShapMode,
    EXACT_SEGMENT_LIMIT,
};
pub use types::{combine_mean_abs, Explanation, Method, Target};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::ensemble::{aggregate, AeeConfig, AggregatedExplanation, ExplanationSet};
use crate::error::Result;
use crate::series::TimeSeries;

/// Per-method configuration bundle used by the dispatcher.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainerSettings {
    pub lime: LimeConfig,
    pub shap: ShapConfig,
    pub lrp: LrpConfig,
    pub aee: AeeConfig,
}

/// Runs every base method configured for the ensemble on one series.
pub fn base_explanations(
    model: &AEModel,
    series: &TimeSeries,
    target: Target,
    settings: &ExplainerSettings,
) -> Result<Vec<Explanation>> {
    settings.aee.validate()?;
    settings
        .aee
        .methods
        .iter()
        .map(|&m| explain(model, series, m, target, settings))
        .collect()
}

/// The ensemble explanation with its scaling metadata.
pub fn aee(
    model: &AEModel,
    series: &TimeSeries,
    target: Target,
    settings: &ExplainerSettings,
) -> Result<AggregatedExplanation> {
    let base = base_explanations(model, series, target, settings)?;
    let set = ExplanationSet::from_explanations(base)?;
    aggregate(&set, &settings.aee.bounds, settings.aee.weights.as_ref())
}

/// Uniform entry point over all methods including the ensemble.
pub fn explain(
    model: &AEModel,
    series: &TimeSeries,
    method: Method,
    target: Target,
    settings: &ExplainerSettings,
) -> Result<Explanation> {
    match method {
        Method::Gradcam => gradcam(model, series, target),
        Method::Lime => lime(model, series, target, &settings.lime),
        Method::Shap => shap(model, series, target, &settings.shap),
        Method::Lrp => lrp(model, series, target, &settings.lrp),
        Method::Aee => aee(model, series, target, settings)?.into_explanation(),
    }
}
