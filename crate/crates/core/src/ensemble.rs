//! Aggregation of per-method heatmaps into one ensemble explanation: every
//! attribution vector is min-max scaled to a shared range, then combined by
//! a weighted pointwise mean. Scaling is per instance and per method, so
//! methods with different output scales contribute comparably.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explanation, Method, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingBounds {
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for ScalingBounds {
    fn default() -> Self {
        ScalingBounds { a_min: 0.0, a_max: 1.0 }
    }
}

impl ScalingBounds {
    pub fn validate(&self) -> Result<()> {
        if !self.a_min.is_finite() || !self.a_max.is_finite() || self.a_max <= self.a_min {
            return Err(Error::Parameter(format!(
                "scaling bounds need finite a_min < a_max, got [{}, {}]",
                self.a_min, self.a_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledExplanation {
    pub values: Vec<f64>,
    /// Set when the input was constant: every output equals `a_min` and the
    /// vector carries no ranking information.
    pub degenerate: bool,
}

/// Min-max scales an attribution vector into `[a_min, a_max]`.
pub fn scale(values: &[f64], bounds: &ScalingBounds) -> Result<ScaledExplanation> {
    bounds.validate()?;
    if values.is_empty() {
        return Err(Error::Data("cannot scale an empty attribution vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("attribution vector contains non-finite values".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(ScaledExplanation { values: vec![bounds.a_min; values.len()], degenerate: true });
    }
    let span = bounds.a_max - bounds.a_min;
    let scaled = values.iter().map(|v| bounds.a_min + (v - lo) / (hi - lo) * span).collect();
    Ok(ScaledExplanation { values: scaled, degenerate: false })
}

/// Per-method heatmaps for one series and target, keyed by method so that
/// iteration order (and therefore aggregation arithmetic) is deterministic.
#[derive(Debug, Clone)]
pub struct ExplanationSet {
    explanations: BTreeMap<Method, Explanation>,
    series_id: String,
    target: Target,
    length: usize,
}

impl ExplanationSet {
    pub fn from_explanations(explanations: Vec<Explanation>) -> Result<ExplanationSet> {
        let first = explanations
            .first()
            .ok_or_else(|| Error::Data("explanation set needs at least one entry".into()))?;
        let (series_id, target, length) = (first.series_id.clone(), first.target, first.len());
        let mut map = BTreeMap::new();
        for e in explanations {
            if e.method == Method::Aee {
                return Err(Error::Parameter("an ensemble cannot aggregate itself".into()));
            }
            if e.series_id != series_id || e.target != target {
                return Err(Error::Data(format!(
                    "mixed explanation set: ({}, {}) vs ({}, {})",
                    e.series_id,
                    e.target.label(),
                    series_id,
                    target.label()
                )));
            }
            if e.len() != length {
                return Err(Error::Dimension(format!(
                    "explanation lengths differ: {} vs {length}",
                    e.len()
                )));
            }
            if map.insert(e.method, e).is_some() {
                return Err(Error::Data("duplicate method in explanation set".into()));
            }
        }
        Ok(ExplanationSet { explanations: map, series_id, target, length })
    }

    pub fn methods(&self) -> Vec<Method> {
        self.explanations.keys().cloned().collect()
    }

    pub fn get(&self, method: Method) -> Option<&Explanation> {
        self.explanations.get(&method)
    }

    pub fn len(&self) -> usize {
        self.explanations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explanations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedExplanation {
    pub series_id: String,
    pub target: Target,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    /// Methods whose heatmap was constant and scaled to all `a_min`.
    pub degenerate_methods: Vec<Method>,
    pub bounds: ScalingBounds,
    /// Normalized weights actually applied (uniform unless overridden).
    pub weights: BTreeMap<Method, f64>,
}

impl AggregatedExplanation {
    pub fn into_explanation(self) -> Result<Explanation> {
        Explanation::new(&self.series_id, Method::Aee, self.target, self.values)
    }
}

/// Weighted pointwise mean of min-max scaled heatmaps. A supplied weight map
/// must cover every method in the set with finite non-negative weights of
/// positive total; extra entries for absent methods are ignored.
pub fn aggregate(
    set: &ExplanationSet,
    bounds: &ScalingBounds,
    weights: Option<&BTreeMap<Method, f64>>,
) -> Result<AggregatedExplanation> {
    bounds.validate()?;
    if set.len() < 2 {
        return Err(Error::Parameter(format!(
            "aggregation needs at least two methods, got {}",
            set.len()
        )));
    }
    let mut resolved = BTreeMap::new();
    for method in set.explanations.keys() {
        let w = match weights {
            None => 1.0,
            Some(map) => *map.get(method).ok_or_else(|| {
                Error::Parameter(format!("no weight supplied for method {method}"))
            })?,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Parameter(format!("weight for {method} must be finite and >= 0, got {w}")));
        }
        resolved.insert(*method, w);
    }
    let total: f64 = resolved.values().sum();
    if total <= 0.0 {
        return Err(Error::Parameter("method weights sum to zero".into()));
    }
    for w in resolved.values_mut() {
        *w /= total;
    }

    let mut values = vec![0.0; set.length];
    let mut degenerate_methods = Vec::new();
    for (method, explanation) in &set.explanations {
        let scaled = scale(&explanation.values, bounds)?;
        if scaled.degenerate {
            degenerate_methods.push(*method);
        }
        let w = resolved[method];
        for (acc, s) in values.iter_mut().zip(&scaled.values) {
            *acc += w * s;
        }
    }
    Ok(AggregatedExplanation {
        series_id: set.series_id.clone(),
        target: set.target,
        values,
        methods: set.methods(),
        degenerate_methods,
        bounds: *bounds,
        weights: resolved,
    })
}

/// Settings for building the ensemble from base methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeeConfig {
    pub bounds: ScalingBounds,
    /// Base methods to aggregate; must not include the ensemble itself.
    pub methods: Vec<Method>,
    pub weights: Option<BTreeMap<Method, f64>>,
}

impl Default for AeeConfig {
    fn default() -> Self {
        AeeConfig {
            bounds: ScalingBounds::default(),
            methods: vec![Method::Gradcam, Method::Lime, Method::Shap, Method::Lrp],
            weights: None,
        }
    }
}

impl AeeConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.methods.len() < 2 {
            return Err(Error::Parameter("the ensemble needs at least two base methods".into()));
        }
        if self.methods.contains(&Method::Aee) {
            return Err(Error::Parameter("the ensemble cannot list itself as a base method".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m) {
                return Err(Error::Parameter(format!("duplicate base method {m}")));
            }
        }
        Ok(())
    }
}
