//! Autoencoder architecture and training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ActivationFn, LayerSpec, Padding};

/// One encoder CNN block: convolution, activation, then optional dropout and
/// optional pool-by-2. The decoder mirrors blocks in reverse order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel_size: usize,
    #[serde(default)]
    pub dropout: Option<f64>,
    #[serde(default = "default_true")]
    pub pool: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Train/validation/test fractions; must be positive and sum to 1.
    pub split: [f64; 3],
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 42,
            split: [0.6, 0.2, 0.2],
        }
    }
}

/// Full autoencoder configuration: 1 to 3 CNN blocks, up to 2 dense blocks
/// between flatten and the bottleneck, a shared activation, and training
/// hyperparameters. The bottleneck itself is a linear dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AEConfig {
    pub input_length: usize,
    pub latent_dim: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub dense_units: Vec<usize>,
    pub activation: ActivationFn,
    pub training: TrainSettings,
}

impl Default for AEConfig {
    fn default() -> Self {
        AEConfig {
            input_length: 1024,
            latent_dim: 3,
            conv_blocks: vec![
                ConvBlock { filters: 32, kernel_size: 16, dropout: None, pool: true },
                ConvBlock { filters: 64, kernel_size: 16, dropout: None, pool: true },
                ConvBlock { filters: 128, kernel_size: 16, dropout: None, pool: true },
            ],
            dense_units: Vec::new(),
            activation: ActivationFn::Relu,
            training: TrainSettings::default(),
        }
    }
}

impl AEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_length < 8 {
            return Err(Error::Parameter(format!(
                "input length must be at least 8, got {}",
                self.input_length
            )));
        }
        if self.latent_dim == 0 {
            return Err(Error::Parameter("latent dimension must be >= 1".into()));
        }
        if self.conv_blocks.is_empty() || self.conv_blocks.len() > 3 {
            return Err(Error::Parameter(format!(
                "between 1 and 3 conv blocks required, got {}",
                self.conv_blocks.len()
            )));
        }
        if self.dense_units.len() > 2 {
            return Err(Error::Parameter(format!(
                "at most 2 dense blocks allowed, got {}",
                self.dense_units.len()
            )));
        }
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.filters == 0 || b.kernel_size == 0 {
                return Err(Error::Parameter(format!(
                    "conv block {i} needs positive filters and kernel size"
                )));
            }
            if let Some(rate) = b.dropout {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::Parameter(format!(
                        "conv block {i} dropout rate {rate} outside [0, 1)"
                    )));
                }
            }
        }
        if self.dense_units.iter().any(|&u| u == 0) {
            return Err(Error::Parameter("dense units must be positive".into()));
        }
        let t = &self.training;
        if t.epochs == 0 || t.batch_size == 0 {
            return Err(Error::Parameter(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        if !(t.learning_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                t.learning_rate
            )));
        }
        if t.split.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Parameter("split fractions must be positive".into()));
        }
        let sum: f64 = t.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        // Each pooled block halves the length; the mirrored decoder doubles
        // it back, which only round-trips when every halving is exact.
        let mut len = self.input_length;
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.pool {
                if len % 2 != 0 {
                    return Err(Error::Parameter(format!(
                        "length {len} at conv block {i} is not divisible by the pool size 2"
                    )));
                }
                len /= 2;
            }
        }
        if len == 0 {
            return Err(Error::Parameter("pooling reduced the length to zero".into()));
        }
        Ok(())
    }

    /// Channels and length of the encoder feature map right before flatten.
    pub fn bottleneck_shape(&self) -> (usize, usize) {
        let mut len = self.input_length;
        for b in &self.conv_blocks {
            if b.pool {
                len /= 2;
            }
        }
        (self.conv_blocks.last().map(|b| b.filters).unwrap_or(1), len)
    }

    pub fn encoder_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let mut specs = Vec::new();
        let mut channels = 1;
        for b in &self.conv_blocks {
            specs.push(LayerSpec::Conv1d {
                in_channels: channels,
                filters: b.filters,
                kernel_size: b.kernel_size,
                stride: 1,
                padding: Padding::Same,
            });
            specs.push(LayerSpec::Activation { function: self.activation });
            if let Some(rate) = b.dropout {
                specs.push(LayerSpec::Dropout { rate });
            }
            if b.pool {
                specs.push(LayerSpec::MaxPool1d { pool_size: 2 });
            }
            channels = b.filters;
        }
        specs.push(LayerSpec::Flatten);
        let (ch, len) = self.bottleneck_shape();
        let mut dim = ch * len;
        for &units in &self.dense_units {
            specs.push(LayerSpec::Dense { in_dim: dim, units });
            specs.push(LayerSpec::Activation { function: self.activation });
            dim = units;
        }
        // Linear bottleneck: latent codes may use the full signed range,
        // which keeps the latent geometry usable for clustering.
        specs.push(LayerSpec::Dense { in_dim: dim, units: self.latent_dim });
        Ok(specs)
    }

    pub fn decoder_specs(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let mut specs = Vec::new();
        let (ch, len) = self.bottleneck_shape();
        let mut dim = self.latent_dim;
        for &units in self.dense_units.iter().rev() {
            specs.push(LayerSpec::Dense { in_dim: dim, units });
            specs.push(LayerSpec::Activation { function: self.activation });
            dim = units;
        }
        specs.push(LayerSpec::Dense { in_dim: dim, units: ch * len });
        specs.push(LayerSpec::Activation { function: self.activation });
        specs.push(LayerSpec::Reshape { channels: ch, length: len });
        let mut channels = ch;
        for (i, b) in self.conv_blocks.iter().enumerate().rev() {
            if b.pool {
                specs.push(LayerSpec::Upsample1d { factor: 2 });
            }
            let out = if i == 0 { b.filters } else { self.conv_blocks[i - 1].filters };
            specs.push(LayerSpec::Conv1d {
                in_channels: channels,
                filters: out,
                kernel_size: b.kernel_size,
                stride: 1,
                padding: Padding::Same,
            });
            specs.push(LayerSpec::Activation { function: self.activation });
            if let Some(rate) = b.dropout {
                specs.push(LayerSpec::Dropout { rate });
            }
            channels = out;
        }
        // Linear projection back to one channel at the input length.
        specs.push(LayerSpec::Conv1d {
            in_channels: channels,
            filters: 1,
            kernel_size: self.conv_blocks[0].kernel_size,
            stride: 1,
            padding: Padding::Same,
        });
        Ok(specs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_three_blocks() {
        let cfg = AEConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.conv_blocks.len(), 3);
        assert_eq!(cfg.latent_dim, 3);
        assert_eq!(cfg.bottleneck_shape(), (128, 128));
    }

    #[test]
    fn block_count_bounds_enforced() {
        let mut cfg = AEConfig::default();
        cfg.conv_blocks.clear();
        assert!(cfg.validate().is_err());
        cfg.conv_blocks = vec![
            ConvBlock { filters: 8, kernel_size: 3, dropout: None, pool: true };
            4
        ];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_must_sum_to_one() {
        let mut cfg = AEConfig::default();
        cfg.training.split = [0.5, 0.2, 0.2];
        assert!(cfg.validate().is_err());
        cfg.training.split = [0.6, 0.2, 0.2];
        cfg.validate().unwrap();
        cfg.training.split = [1.0, 0.0, 0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn indivisible_pooling_rejected() {
        let mut cfg = AEConfig::default();
        cfg.input_length = 1000; // 1000 -> 500 -> 250 -> 125, then a 4th pool would fail
        cfg.validate().unwrap();
        cfg.input_length = 1002; // 501 after one pool, second pool fails
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn encoder_specs_end_with_latent_dense() {
        let cfg = AEConfig {
            input_length: 64,
            conv_blocks: vec![ConvBlock { filters: 4, kernel_size: 3, dropout: Some(0.2), pool: true }],
            dense_units: vec![16],
            ..AEConfig::default()
        };
        let specs = cfg.encoder_specs().unwrap();
        assert!(matches!(
            specs.last(),
            Some(LayerSpec::Dense { units: 3, .. })
        ));
        assert!(specs.iter().any(|s| matches!(s, LayerSpec::Dropout { .. })));
    }

    #[test]
    fn decoder_specs_end_with_single_channel_conv() {
        let cfg = AEConfig {
            input_length: 64,
            conv_blocks: vec![
                ConvBlock { filters: 4, kernel_size: 3, dropout: None, pool: true },
                ConvBlock { filters: 8, kernel_size: 5, dropout: None, pool: true },
            ],
            ..AEConfig::default()
        };
        let specs = cfg.decoder_specs().unwrap();
        assert!(matches!(
            specs.last(),
            Some(LayerSpec::Conv1d { filters: 1, .. })
        ));
        let upsamples = specs
            .iter()
            .filter(|s| matches!(s, LayerSpec::Upsample1d { .. }))
            .count();
        assert_eq!(upsamples, 2);
    }
}
