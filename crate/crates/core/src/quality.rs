//! Perturbation-based quality scores for explanations. For each instance we
//! compare three latent distances: the series to itself (zero), to a copy
//! with randomly chosen positions perturbed, and to a copy with the
//! explanation's top positions perturbed. A faithful explanation moves the
//! latent code at least as far as the random baseline.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AEModel;
use crate::error::{Error, Result};
use crate::explain::{explain, ExplainerSettings, Method, Target};
use crate::seed::{derive_seed, hash_str, rng_from};
use crate::series::{Label, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbStrategy {
    /// Permute the selected values among the selected positions.
    Shuffle,
    Zero,
    /// Replace with the series mean.
    Mean,
}

impl PerturbStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbStrategy::Shuffle => "shuffle",
            PerturbStrategy::Zero => "zero",
            PerturbStrategy::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(PerturbStrategy::Shuffle),
            "zero" => Ok(PerturbStrategy::Zero),
            "mean" => Ok(PerturbStrategy::Mean),
            other => Err(Error::Parameter(format!("unknown perturbation strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Fraction of time steps to perturb, in (0, 1].
    pub fraction: f64,
    pub strategy: PerturbStrategy,
    pub seed: u64,
}

impl PerturbationConfig {
    fn validate(&self) -> Result<()> {
        if !self.fraction.is_finite() || self.fraction <= 0.0 || self.fraction > 1.0 {
            return Err(Error::Parameter(format!(
                "perturbation fraction must be in (0, 1], got {}",
                self.fraction
            )));
        }
        Ok(())
    }

    /// Number of positions to perturb: ceil(fraction * n), guarded against
    /// the product landing epsilon above an integer.
    fn count(&self, n: usize) -> usize {
        ((self.fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub values: Vec<f64>,
    /// Selected positions, ascending; always exactly ceil(fraction * n).
    pub positions: Vec<usize>,
    /// All-equal importance: the tie rule picked the first k positions.
    pub degenerate_selection: bool,
}

/// Top `count` indices by importance, ties broken toward the lower index.
fn top_positions(importance: &[f64], count: usize) -> Result<(Vec<usize>, bool)> {
    if importance.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("importance vector contains non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance[b].partial_cmp(&importance[a]).expect("finite importance").then(a.cmp(&b))
    });
    let mut picked = order[..count].to_vec();
    picked.sort_unstable();
    let degenerate = importance.windows(2).all(|w| w[0] == w[1]);
    Ok((picked, degenerate))
}

fn apply_strategy(
    values: &[f64],
    positions: &[usize],
    config: &PerturbationConfig,
) -> Vec<f64> {
    let mut out = values.to_vec();
    match config.strategy {
        PerturbStrategy::Shuffle => {
            let mut selected: Vec<f64> = positions.iter().map(|&p| values[p]).collect();
            selected.shuffle(&mut rng_from(config.seed));
            for (&p, v) in positions.iter().zip(selected) {
                out[p] = v;
            }
        }
        PerturbStrategy::Zero => {
            for &p in positions {
                out[p] = 0.0;
            }
        }
        PerturbStrategy::Mean => {
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            for &p in positions {
                out[p] = mean;
            }
        }
    }
    out
}

/// Perturbs the positions the explanation ranks most important.
pub fn perturb_by_explanation(
    values: &[f64],
    importance: &[f64],
    config: &PerturbationConfig,
) -> Result<Perturbed> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::Data("cannot perturb an empty series".into()));
    }
    if importance.len() != values.len() {
        return Err(Error::Dimension(format!(
            "importance length {} does not match series length {}",
            importance.len(),
            values.len()
        )));
    }
    let count = config.count(values.len());
    let (positions, degenerate_selection) = top_positions(importance, count)?;
    Ok(Perturbed { values: apply_strategy(values, &positions, config), positions, degenerate_selection })
}

/// Perturbs the same number of uniformly chosen positions; identical
/// mechanics otherwise, isolating the explanation's contribution.
pub fn perturb_random(values: &[f64], config: &PerturbationConfig) -> Result<Perturbed> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::Data("cannot perturb an empty series".into()));
    }
    let count = config.count(values.len());
    let mut rng = rng_from(config.seed);
    let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, values.len(), count).into_vec();
    positions.sort_unstable();
    // The shuffle inside apply_strategy draws from the same seeded stream.
    let mut out = values.to_vec();
    match config.strategy {
        PerturbStrategy::Shuffle => {
            let mut selected: Vec<f64> = positions.iter().map(|&p| values[p]).collect();
            selected.shuffle(&mut rng);
            for (&p, v) in positions.iter().zip(selected) {
                out[p] = v;
            }
        }
        _ => out = apply_strategy(values, &positions, config),
    }
    Ok(Perturbed { values: out, positions, degenerate_selection: false })
}

/// Latent-space distance between two series under the same encoder,
/// normalized by the square root of the latent dimension.
pub fn qm_distance(model: &AEModel, a: &[f64], b: &[f64]) -> Result<f64> {
    let la = model.encode_values(a)?;
    let lb = model.encode_values(b)?;
    let sq: f64 = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq.sqrt() / (model.latent_dim as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QmConfig {
    pub fraction: f64,
    pub strategy: PerturbStrategy,
    /// Random-baseline draws averaged per instance.
    pub trials: usize,
    /// OK instances sampled into the evaluation; `None` keeps all.
    pub ok_sample: Option<usize>,
    pub master_seed: u64,
}

impl Default for QmConfig {
    fn default() -> Self {
        QmConfig {
            fraction: 0.1,
            strategy: PerturbStrategy::Shuffle,
            trials: 5,
            ok_sample: Some(100),
            master_seed: 42,
        }
    }
}

impl QmConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fraction.is_finite() || self.fraction <= 0.0 || self.fraction > 1.0 {
            return Err(Error::Parameter(format!(
                "perturbation fraction must be in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("quality evaluation needs at least one trial".into()));
        }
        if self.ok_sample == Some(0) {
            return Err(Error::Parameter("ok_sample must be >= 1 when given".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmResult {
    pub series_id: String,
    pub method: Method,
    pub label: Label,
    pub d_self: f64,
    pub d_random: f64,
    pub d_xai: f64,
    /// d_self <= d_random <= d_xai on raw distances.
    pub ordering_satisfied: bool,
    pub degenerate_selection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Random-position baseline.
    Noise,
    /// Explanation-guided perturbation.
    Xai,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Noise => "noise",
            Condition::Xai => "xai",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqrStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

/// Linear-interpolation quantiles (position p*(n-1)) and Tukey fences.
pub fn iqr_stats(values: &[f64]) -> Result<IqrStats> {
    if values.is_empty() {
        return Err(Error::Data("cannot summarize an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("sample contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let q = |p: f64| {
        let h = p * (sorted.len() - 1) as f64;
        let i = h.floor() as usize;
        let f = h - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - f) + sorted[i + 1] * f
        } else {
            sorted[i]
        }
    };
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    Ok(IqrStats {
        q1,
        median,
        q3,
        lower_fence: q1 - 1.5 * iqr,
        upper_fence: q3 + 1.5 * iqr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmSummaryRow {
    pub method: Method,
    pub label: Label,
    pub condition: Condition,
    pub count: usize,
    /// Absent for an empty stratum; nothing is fabricated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<IqrStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmReport {
    pub results: Vec<QmResult>,
    /// Stats over distances min-max normalized per method across both
    /// conditions of the evaluated set.
    pub summary: Vec<QmSummaryRow>,
    pub normalization: BTreeMap<Method, NormRange>,
    pub fraction: f64,
    pub strategy: PerturbStrategy,
    pub trials: usize,
    pub ok_evaluated: usize,
    pub nok_evaluated: usize,
}

const QM_TAG: &str = "qm";
const OK_PICK_TAG: &str = "qm-ok-pick";
/// Trial index reserved for the explanation arm's seed.
const XAI_TRIAL: u64 = u64::MAX;

fn select_instances(dataset: &[TimeSeries], config: &QmConfig) -> Result<Vec<usize>> {
    let mut ok = Vec::new();
    let mut nok = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        match s.label {
            Some(Label::Ok) => ok.push(i),
            Some(Label::Nok) => nok.push(i),
            None => {
                return Err(Error::Data(format!(
                    "quality evaluation needs labels; series `{}` has none",
                    s.id
                )))
            }
        }
    }
    if let Some(k) = config.ok_sample {
        if k < ok.len() {
            let mut rng = rng_from(derive_seed(config.master_seed, &[hash_str(OK_PICK_TAG)]));
            let picked = rand::seq::index::sample(&mut rng, ok.len(), k);
            ok = picked.into_iter().map(|j| ok[j]).collect();
            ok.sort_unstable();
        }
    }
    let mut all: Vec<usize> = ok.into_iter().chain(nok).collect();
    all.sort_unstable();
    Ok(all)
}

/// Runs the full protocol: every NOK instance plus a seeded OK sample, one
/// explanation-guided and `trials` random perturbations each, distances
/// summarized per method, class, and condition.
pub fn evaluate(
    model: &AEModel,
    dataset: &[TimeSeries],
    methods: &[Method],
    settings: &ExplainerSettings,
    config: &QmConfig,
) -> Result<QmReport> {
    if methods.is_empty() {
        return Err(Error::Parameter("quality evaluation needs at least one method".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in methods {
        if !seen.insert(m) {
            return Err(Error::Parameter(format!("duplicate method {m} in quality evaluation")));
        }
    }
    config.validate()?;

    let selected = select_instances(dataset, config)?;
    let mut ok_evaluated = 0;
    let mut nok_evaluated = 0;
    let mut results = Vec::with_capacity(selected.len() * methods.len());
    for &i in &selected {
        let series = &dataset[i];
        let label = series.label.expect("selection keeps labeled series only");
        match label {
            Label::Ok => ok_evaluated += 1,
            Label::Nok => nok_evaluated += 1,
        }
        let d_self = qm_distance(model, &series.values, &series.values)?;
        let mut d_random_sum = 0.0;
        for trial in 0..config.trials {
            let seed =
                derive_seed(config.master_seed, &[hash_str(QM_TAG), hash_str(&series.id), trial as u64]);
            let cfg = PerturbationConfig { fraction: config.fraction, strategy: config.strategy, seed };
            let p = perturb_random(&series.values, &cfg)?;
            d_random_sum += qm_distance(model, &series.values, &p.values)?;
        }
        let d_random = d_random_sum / config.trials as f64;
        let xai_seed =
            derive_seed(config.master_seed, &[hash_str(QM_TAG), hash_str(&series.id), XAI_TRIAL]);
        for &method in methods {
            let explanation = explain(model, series, method, Target::Combined, settings)?;
            let cfg =
                PerturbationConfig { fraction: config.fraction, strategy: config.strategy, seed: xai_seed };
            let p = perturb_by_explanation(&series.values, &explanation.values, &cfg)?;
            let d_xai = qm_distance(model, &series.values, &p.values)?;
            results.push(QmResult {
                series_id: series.id.clone(),
                method,
                label,
                d_self,
                d_random,
                d_xai,
                ordering_satisfied: d_self <= d_random && d_random <= d_xai,
                degenerate_selection: p.degenerate_selection,
            });
        }
    }

    let mut summary = Vec::new();
    let mut normalization = BTreeMap::new();
    for &method in methods {
        let of_method: Vec<&QmResult> = results.iter().filter(|r| r.method == method).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in &of_method {
            lo = lo.min(r.d_random).min(r.d_xai);
            hi = hi.max(r.d_random).max(r.d_xai);
        }
        if of_method.is_empty() {
            lo = 0.0;
            hi = 0.0;
        }
        normalization.insert(method, NormRange { min: lo, max: hi });
        let norm = |d: f64| if hi > lo { (d - lo) / (hi - lo) } else { 0.0 };
        for label in [Label::Ok, Label::Nok] {
            for condition in [Condition::Noise, Condition::Xai] {
                let vals: Vec<f64> = of_method
                    .iter()
                    .filter(|r| r.label == label)
                    .map(|r| match condition {
                        Condition::Noise => norm(r.d_random),
                        Condition::Xai => norm(r.d_xai),
                    })
                    .collect();
                let stats = if vals.is_empty() { None } else { Some(iqr_stats(&vals)?) };
                summary.push(QmSummaryRow { method, label, condition, count: vals.len(), stats });
            }
        }
    }

    Ok(QmReport {
        results,
        summary,
        normalization,
        fraction: config.fraction,
        strategy: config.strategy,
        trials: config.trials,
        ok_evaluated,
        nok_evaluated,
    })
}
