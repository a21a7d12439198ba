//! Synthetic corpus generator: every series follows regime A (two superposed
//! sinusoids) for the first two thirds and regime B (offset, faster, lower
//! amplitude) on the final third, plus Gaussian noise and per-instance phase
//! jitter. A configurable fraction of instances gets one injected anomaly
//! and the NOK label; a manifest records every seed and spec so any corpus
//! is reproducible from its config alone.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, hash_str, rng_from};
use crate::series::{Label, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub length: usize,
    pub size: usize,
    pub nok_rate: f64,
    pub noise_sigma: f64,
    /// Regime boundary as a fraction of the length; the final third is
    /// everything at or beyond `round(length * boundary_fraction)`.
    pub boundary_fraction: f64,
    /// Regime A frequencies are cycles over the whole series.
    pub a_freq1: f64,
    pub a_freq2: f64,
    pub a_amp2: f64,
    pub b_offset: f64,
    pub b_freq: f64,
    pub b_amp: f64,
    /// Disruption arc parameters: pattern_disruption windows blend toward a
    /// slow sinusoid below regime A's band.
    pub disruption_freq: f64,
    pub disruption_amp: f64,
    pub master_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            length: 1024,
            size: 5000,
            nok_rate: 0.0068,
            noise_sigma: 0.05,
            boundary_fraction: 2.0 / 3.0,
            a_freq1: 6.0,
            a_freq2: 15.0,
            a_amp2: 0.5,
            b_offset: 1.5,
            b_freq: 40.0,
            b_amp: 0.3,
            disruption_freq: 2.0,
            disruption_amp: 1.2,
            master_seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < 64 {
            return Err(Error::Parameter(format!("series length must be >= 64, got {}", self.length)));
        }
        if !(0.0..1.0).contains(&self.nok_rate) {
            return Err(Error::Parameter(format!("nok_rate must be in [0, 1), got {}", self.nok_rate)));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Parameter(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        let b = self.boundary();
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) || b == 0 || b >= self.length {
            return Err(Error::Parameter(format!(
                "regime boundary must fall strictly inside the series, got fraction {}",
                self.boundary_fraction
            )));
        }
        for (name, v) in [
            ("a_freq1", self.a_freq1),
            ("a_freq2", self.a_freq2),
            ("b_freq", self.b_freq),
            ("disruption_freq", self.disruption_freq),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("a_amp2", self.a_amp2),
            ("b_amp", self.b_amp),
            ("b_offset", self.b_offset),
            ("disruption_amp", self.disruption_amp),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// First index of regime B.
    pub fn boundary(&self) -> usize {
        (self.length as f64 * self.boundary_fraction).round() as usize
    }

    fn regime_a(&self, u: f64, phase: f64) -> f64 {
        (std::f64::consts::TAU * self.a_freq1 * u + phase).sin()
            + self.a_amp2 * (std::f64::consts::TAU * self.a_freq2 * u + phase).sin()
    }

    fn regime_b(&self, u: f64, phase: f64) -> f64 {
        self.b_offset + self.b_amp * (std::f64::consts::TAU * self.b_freq * u + phase).sin()
    }

    fn disruption_arc(&self, u: f64, phase: f64) -> f64 {
        self.disruption_amp * (std::f64::consts::TAU * self.disruption_freq * u + phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Window is overtaken by a slow drifting arc below regime A's band,
    /// keeping a small noise ripple.
    PatternDisruption,
    /// Window keeps following regime A instead of switching to regime B.
    RegimeMissing,
    /// Window is rescaled about its mean by a factor of 1 + magnitude.
    AmplitudeShift,
}

pub const ANOMALY_KINDS: [AnomalyKind; 3] = [
    AnomalyKind::PatternDisruption,
    AnomalyKind::RegimeMissing,
    AnomalyKind::AmplitudeShift,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    /// Half-open window `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// Blend strength; 0 is a degenerate no-op, blends cap at 1.
    pub magnitude: f64,
}

impl AnomalySpec {
    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.start >= self.end || self.end > series_len {
            return Err(Error::Parameter(format!(
                "anomaly window [{}, {}) does not fit a series of length {series_len}",
                self.start, self.end
            )));
        }
        if !self.magnitude.is_finite() || self.magnitude < 0.0 {
            return Err(Error::Parameter(format!(
                "anomaly magnitude must be >= 0, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }
}

/// Standard normal sample via the Box-Muller transform.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// One clean-pattern series: regime A up to the boundary, regime B after,
/// with per-instance phase jitter and Gaussian noise.
pub fn generate_normal(config: &GeneratorConfig, instance_seed: u64) -> Result<TimeSeries> {
    config.validate()?;
    let mut rng = rng_from(instance_seed);
    let phase_a = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_b = rng.gen_range(0.0..std::f64::consts::TAU);
    let boundary = config.boundary();
    let n = config.length;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let u = i as f64 / n as f64;
        let clean = if i < boundary {
            config.regime_a(u, phase_a)
        } else {
            config.regime_b(u, phase_b)
        };
        values.push(clean + config.noise_sigma * gauss(&mut rng));
    }
    Ok(TimeSeries { id: String::new(), values, label: Some(Label::Ok) })
}

/// Applies one anomaly inside its window; everything outside the window is
/// bit-identical to the input and the label flips to NOK.
pub fn inject_anomaly(
    config: &GeneratorConfig,
    series: &TimeSeries,
    spec: &AnomalySpec,
    seed: u64,
) -> Result<TimeSeries> {
    config.validate()?;
    spec.validate(series.values.len())?;
    let mut values = series.values.clone();
    if spec.magnitude > 0.0 {
        let mut rng = rng_from(seed);
        let n = series.values.len() as f64;
        let window = &mut values[spec.start..spec.end];
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        let blend = spec.magnitude.min(1.0);
        match spec.kind {
            AnomalyKind::PatternDisruption => {
                // A drifting excursion: the window rides one slow seeded arc
                // instead of the expected pattern. The disruption lives in
                // the ordering of the window, not just its value range, so it
                // stays visible in both regimes and dies under reshuffling.
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                for (k, w) in window.iter_mut().enumerate() {
                    let u = (spec.start + k) as f64 / n;
                    let target = config.disruption_arc(u, phase) + config.noise_sigma * gauss(&mut rng);
                    *w = (1.0 - blend) * *w + blend * target;
                }
            }
            AnomalyKind::RegimeMissing => {
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                for (k, w) in window.iter_mut().enumerate() {
                    let u = (spec.start + k) as f64 / n;
                    let target = config.regime_a(u, phase);
                    *w = (1.0 - blend) * *w + blend * target;
                }
            }
            AnomalyKind::AmplitudeShift => {
                for w in window.iter_mut() {
                    *w = mean + (*w - mean) * (1.0 + spec.magnitude);
                }
            }
        }
    }
    Ok(TimeSeries { id: series.id.clone(), values, label: Some(Label::Nok) })
}

/// NOK instance count: ceiling of `rate * size`, guarded against the product
/// landing epsilon above an integer (0.0068 * 5000 must give 34, not 35).
pub fn nok_count(size: usize, nok_rate: f64) -> usize {
    (nok_rate * size as f64 - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub spec: AnomalySpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub label: Label,
    pub instance_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<AnomalyRecord>,
}

/// Everything needed to regenerate the corpus: the config (shared regime
/// parameters) plus per-instance seeds and anomaly specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: GeneratorConfig,
    pub n_ok: usize,
    pub n_nok: usize,
    pub instances: Vec<InstanceRecord>,
}

const INSTANCE_TAG: &str = "instance";
const NOK_PICK_TAG: &str = "nok-pick";
const ANOMALY_TAG: &str = "anomaly";
const INJECT_TAG: &str = "inject";

fn random_spec(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> AnomalySpec {
    let n = config.length;
    let kind = ANOMALY_KINDS[rng.gen_range(0..ANOMALY_KINDS.len())];
    // Magnitude ranges are per kind: blend kinds saturate at 1, while the
    // amplitude rescale is open-ended and needs to clear the noise floor.
    let magnitude = match kind {
        AnomalyKind::AmplitudeShift => rng.gen_range(1.4..2.6),
        _ => rng.gen_range(0.7..1.0),
    };
    let (start, end) = match kind {
        AnomalyKind::RegimeMissing => (config.boundary(), n),
        _ => {
            // Anywhere inside the final two thirds, width n/8 ..= n/4.
            let width = rng.gen_range(n / 8..=n / 4).max(8);
            let lo = n / 3;
            let start = rng.gen_range(lo..=n - width);
            (start, start + width)
        }
    };
    AnomalySpec { kind, start, end, magnitude }
}

/// The full labeled corpus and its manifest, a pure function of the config.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<(Vec<TimeSeries>, CorpusManifest)> {
    config.validate()?;
    let n_nok = nok_count(config.size, config.nok_rate);
    let mut nok_at = vec![false; config.size];
    if n_nok > 0 {
        let mut pick_rng = rng_from(derive_seed(config.master_seed, &[hash_str(NOK_PICK_TAG)]));
        for idx in rand::seq::index::sample(&mut pick_rng, config.size, n_nok) {
            nok_at[idx] = true;
        }
    }

    let mut dataset = Vec::with_capacity(config.size);
    let mut instances = Vec::with_capacity(config.size);
    for i in 0..config.size {
        let id = format!("s{i:05}");
        let instance_seed = derive_seed(config.master_seed, &[hash_str(INSTANCE_TAG), i as u64]);
        let mut series = generate_normal(config, instance_seed)?;
        series.id = id.clone();
        let mut anomaly = None;
        if nok_at[i] {
            let mut spec_rng = rng_from(derive_seed(config.master_seed, &[hash_str(ANOMALY_TAG), i as u64]));
            let spec = random_spec(config, &mut spec_rng);
            let inject_seed = derive_seed(config.master_seed, &[hash_str(INJECT_TAG), i as u64]);
            series = inject_anomaly(config, &series, &spec, inject_seed)?;
            anomaly = Some(AnomalyRecord { spec, seed: inject_seed });
        }
        instances.push(InstanceRecord { id, label: series.label.unwrap_or(Label::Ok), instance_seed, anomaly });
        dataset.push(series);
    }
    let manifest = CorpusManifest {
        config: config.clone(),
        n_ok: config.size - n_nok,
        n_nok,
        instances,
    };
    Ok((dataset, manifest))
}
