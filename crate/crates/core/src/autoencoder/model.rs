//! The trained autoencoder: encode/decode/reconstruct plus a versioned
//! binary container for persistence.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, Mode, Network, Tensor, Trace};
use crate::seed::rng_from;
use crate::series::TimeSeries;

pub const MODEL_MAGIC: [u8; 4] = *b"AEE1";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Input scaling applied inside `encode`/`reconstruct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Each series is mapped to [0, 1] by its own min and max.
    PerSeriesMinMax,
}

/// Per-series scaling parameters, kept so reconstructions can be mapped
/// back to the original value range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub min: f64,
    pub range: f64,
}

impl Normalization {
    pub fn apply(self, values: &[f64]) -> (Vec<f64>, NormParams) {
        match self {
            Normalization::None => (
                values.to_vec(),
                NormParams { min: 0.0, range: 1.0 },
            ),
            Normalization::PerSeriesMinMax => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let range = max - min;
                if range == 0.0 {
                    // Constant series: map to all zeros, reconstruct as the
                    // constant via `min`.
                    (vec![0.0; values.len()], NormParams { min, range: 0.0 })
                } else {
                    (
                        values.iter().map(|v| (v - min) / range).collect(),
                        NormParams { min, range },
                    )
                }
            }
        }
    }

    pub fn invert(self, values: &[f64], params: NormParams) -> Vec<f64> {
        match self {
            Normalization::None => values.to_vec(),
            Normalization::PerSeriesMinMax => values
                .iter()
                .map(|v| v * params.range + params.min)
                .collect(),
        }
    }
}

/// Encoder/decoder pair with fixed input length and latent dimension.
/// Inference only; training builds and mutates the networks before wrapping
/// them into a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AEModel {
    pub input_length: usize,
    pub latent_dim: usize,
    pub normalization: Normalization,
    pub encoder: Network,
    pub decoder: Network,
}

impl AEModel {
    /// Wraps pre-built networks after probing their shape contracts with a
    /// zero input: encoder must map `[1, input_length]` to `latent_dim`
    /// values; a nonempty decoder must map the latent back to
    /// `input_length` values.
    pub fn from_parts(
        encoder: Network,
        decoder: Network,
        input_length: usize,
        latent_dim: usize,
        normalization: Normalization,
    ) -> Result<AEModel> {
        let probe = Tensor::from_vec(vec![1, input_length], vec![0.0; input_length])?;
        let latent = encoder.forward(&probe)?;
        if latent.len() != latent_dim {
            return Err(Error::Dimension(format!(
                "encoder produced {} values, expected latent_dim {latent_dim}",
                latent.len()
            )));
        }
        if !decoder.layers.is_empty() {
            let out = decoder.forward(&Tensor::vector(&vec![0.0; latent_dim]))?;
            if out.len() != input_length {
                return Err(Error::Dimension(format!(
                    "decoder produced {} values, expected input length {input_length}",
                    out.len()
                )));
            }
        }
        Ok(AEModel {
            input_length,
            latent_dim,
            normalization,
            encoder,
            decoder,
        })
    }

    fn check_input(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.input_length {
            return Err(Error::Dimension(format!(
                "series length {} does not match model input length {}",
                values.len(),
                self.input_length
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("series contains non-finite values".into()));
        }
        Ok(())
    }

    /// Normalized `[1, input_length]` tensor for `values`, the exact tensor
    /// the encoder consumes. Explainers perturb raw series and re-enter
    /// through this same path so they always see deployed-model behavior.
    pub fn encoder_input(&self, values: &[f64]) -> Result<Tensor> {
        self.check_input(values)?;
        let (normalized, _) = self.normalization.apply(values);
        Tensor::from_vec(vec![1, self.input_length], normalized)
    }

    /// Inference forward trace of the encoder (dropout inactive), as needed
    /// by gradient- and relevance-based explainers.
    pub fn encode_trace(&self, values: &[f64]) -> Result<Trace> {
        let input = self.encoder_input(values)?;
        self.encoder.forward_trace(&input, Mode::Infer, None)
    }

    pub fn encode_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        let input = self.encoder_input(values)?;
        let latent = self.encoder.forward(&input)?;
        if !latent.all_finite() {
            return Err(Error::Numerical("encoder produced non-finite latent".into()));
        }
        Ok(latent.into_data())
    }

    pub fn encode(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        self.encode_values(&series.values)
    }

    /// Decodes a latent vector. The output lives on the model's normalized
    /// scale; `reconstruct` maps back to a concrete series' value range.
    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        if latent.len() != self.latent_dim {
            return Err(Error::Dimension(format!(
                "latent length {} does not match latent_dim {}",
                latent.len(),
                self.latent_dim
            )));
        }
        if self.decoder.layers.is_empty() {
            return Err(Error::State("model has no decoder".into()));
        }
        let out = self.decoder.forward(&Tensor::vector(latent))?;
        Ok(out.into_data())
    }

    pub fn reconstruct_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_input(values)?;
        let (normalized, params) = self.normalization.apply(values);
        let input = Tensor::from_vec(vec![1, self.input_length], normalized)?;
        let latent = self.encoder.forward(&input)?;
        if self.decoder.layers.is_empty() {
            return Err(Error::State("model has no decoder".into()));
        }
        let out = self.decoder.forward(&latent.reshaped(vec![latent.len()])?)?;
        if !out.all_finite() {
            return Err(Error::Numerical(
                "decoder produced non-finite reconstruction".into(),
            ));
        }
        Ok(self.normalization.invert(out.data(), params))
    }

    pub fn reconstruct(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        self.reconstruct_values(&series.values)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    input_length: usize,
    latent_dim: usize,
    normalization: Normalization,
    encoder: Vec<LayerSpec>,
    decoder: Vec<LayerSpec>,
}

/// Binary layout: magic "AEE1", u32 LE format version, u64 LE header length,
/// JSON header, u64 LE parameter count, then parameters as f64 LE
/// (encoder first, decoder second, layer order).
pub fn save_model(model: &AEModel, path: &Path) -> Result<()> {
    let header = ModelHeader {
        input_length: model.input_length,
        latent_dim: model.latent_dim,
        normalization: model.normalization,
        encoder: model.encoder.specs(),
        decoder: model.decoder.specs(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut params = model.encoder.export_params();
    params.extend(model.decoder.export_params());

    let mut bytes = Vec::with_capacity(4 + 4 + 8 + header_bytes.len() + 8 + params.len() * 8);
    bytes.extend_from_slice(&MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    bytes.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AEModel> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > bytes.len() {
            return Err(Error::Parse("model file truncated".into()));
        }
        let slice = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(slice)
    };

    if take(&mut cursor, 4)? != MODEL_MAGIC {
        return Err(Error::Parse("not a model file (bad magic bytes)".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let header: ModelHeader = serde_json::from_slice(take(&mut cursor, header_len)?)
        .map_err(|e| Error::Parse(format!("model header: {e}")))?;
    let param_count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let param_bytes = take(&mut cursor, param_count * 8)?;
    let params: Vec<f64> = param_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    // A throwaway seeded init; every parameter is overwritten below.
    let mut rng = rng_from(0);
    let mut encoder = Network::from_specs(&header.encoder, &mut rng)?;
    let mut decoder = Network::from_specs(&header.decoder, &mut rng)?;
    let enc_count = encoder.param_count();
    if enc_count + decoder.param_count() != params.len() {
        return Err(Error::Parse(format!(
            "parameter blob holds {} values, architecture needs {}",
            params.len(),
            enc_count + decoder.param_count()
        )));
    }
    encoder.import_params(&params[..enc_count])?;
    decoder.import_params(&params[enc_count..])?;
    AEModel::from_parts(
        encoder,
        decoder,
        header.input_length,
        header.latent_dim,
        header.normalization,
    )
}

/// Small helper used by tests and toy explainers: encoder-only model with a
/// given layer list and no decoder.
pub fn encoder_only(
    layers: Vec<Layer>,
    input_length: usize,
    latent_dim: usize,
    normalization: Normalization,
) -> Result<AEModel> {
    AEModel::from_parts(
        Network { layers },
        Network { layers: Vec::new() },
        input_length,
        latent_dim,
        normalization,
    )
}
