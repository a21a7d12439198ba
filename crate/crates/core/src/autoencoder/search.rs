//! Desk-scale random architecture search over the constrained grid:
//! 1-3 CNN blocks (filters 16/32/64/128, kernel 8/16/32, pool 2, optional
//! dropout 0.1-0.5), 0-2 dense blocks (32/64/128/256 units), and one of the
//! four activations.

use rand::Rng;
use serde::Serialize;

use crate::autoencoder::config::{AEConfig, ConvBlock, TrainSettings};
use crate::autoencoder::train::train;
use crate::error::{Error, Result};
use crate::nn::ActivationFn;
use crate::seed::{derive_seed, hash_str, rng_from};
use crate::series::TimeSeries;

const FILTERS: [usize; 4] = [16, 32, 64, 128];
const KERNELS: [usize; 3] = [8, 16, 32];
const DROPOUTS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const UNITS: [usize; 4] = [32, 64, 128, 256];
const ACTIVATIONS: [ActivationFn; 4] = [
    ActivationFn::Relu,
    ActivationFn::Tanh,
    ActivationFn::Sigmoid,
    ActivationFn::Softmax,
];

#[derive(Debug, Clone, Serialize)]
pub struct SearchEntry {
    pub trial: usize,
    pub config: AEConfig,
    pub val_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub best: AEConfig,
    /// All trials sorted ascending by final validation MSE.
    pub leaderboard: Vec<SearchEntry>,
}

fn sample_config(
    input_length: usize,
    latent_dim: usize,
    training: &TrainSettings,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> AEConfig {
    loop {
        let n_blocks = rng.gen_range(1..=3usize);
        let conv_blocks: Vec<ConvBlock> = (0..n_blocks)
            .map(|_| ConvBlock {
                filters: FILTERS[rng.gen_range(0..FILTERS.len())],
                kernel_size: KERNELS[rng.gen_range(0..KERNELS.len())],
                dropout: if rng.gen_bool(0.5) {
                    Some(DROPOUTS[rng.gen_range(0..DROPOUTS.len())])
                } else {
                    None
                },
                pool: true,
            })
            .collect();
        let n_dense = rng.gen_range(0..=2usize);
        let dense_units: Vec<usize> =
            (0..n_dense).map(|_| UNITS[rng.gen_range(0..UNITS.len())]).collect();
        let candidate = AEConfig {
            input_length,
            latent_dim,
            conv_blocks,
            dense_units,
            activation: ACTIVATIONS[rng.gen_range(0..ACTIVATIONS.len())],
            training: training.clone(),
        };
        // Pool divisibility can reject a draw for short lengths; resample.
        if candidate.validate().is_ok() {
            return candidate;
        }
    }
}

/// Samples `trials` architectures, trains each for `epochs`, and ranks by
/// final validation MSE. Desk-scale stand-in for a full tuning campaign.
pub fn random_search(
    dataset: &[TimeSeries],
    base: &AEConfig,
    trials: usize,
    epochs: usize,
    seed: u64,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(Error::Parameter("random search needs at least 1 trial".into()));
    }
    if epochs == 0 {
        return Err(Error::Parameter("random search needs at least 1 epoch".into()));
    }
    if base.input_length % 2 != 0 {
        return Err(Error::Parameter(
            "search space requires an even input length (every block pools by 2)".into(),
        ));
    }
    let mut training = base.training.clone();
    training.epochs = epochs;

    let mut rng = rng_from(derive_seed(seed, &[hash_str("arch-search")]));
    let mut leaderboard = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut config = sample_config(base.input_length, base.latent_dim, &training, &mut rng);
        config.training.seed = derive_seed(seed, &[hash_str("trial"), trial as u64]);
        let (_, report) = train(dataset, &config)?;
        let val_mse = *report.val_mse.last().unwrap_or(&f64::INFINITY);
        leaderboard.push(SearchEntry { trial, config, val_mse });
    }
    leaderboard.sort_by(|a, b| a.val_mse.partial_cmp(&b.val_mse).unwrap().then(a.trial.cmp(&b.trial)));
    Ok(SearchResult { best: leaderboard[0].config.clone(), leaderboard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Label;

    fn dataset() -> Vec<TimeSeries> {
        (0..12)
            .map(|i| {
                let values: Vec<f64> =
                    (0..64).map(|j| (j as f64 * 0.3 + i as f64 * 0.05).sin()).collect();
                TimeSeries::new(format!("s{i}"), values).with_label(Label::Ok)
            })
            .collect()
    }

    fn base() -> AEConfig {
        let mut cfg = AEConfig { input_length: 64, ..AEConfig::default() };
        cfg.training.batch_size = 6;
        cfg
    }

    #[test]
    fn sampled_configs_stay_in_grid() {
        let mut rng = rng_from(3);
        for _ in 0..50 {
            let cfg = sample_config(64, 3, &TrainSettings::default(), &mut rng);
            cfg.validate().unwrap();
            for b in &cfg.conv_blocks {
                assert!(FILTERS.contains(&b.filters));
                assert!(KERNELS.contains(&b.kernel_size));
                if let Some(d) = b.dropout {
                    assert!(DROPOUTS.contains(&d));
                }
            }
            for u in &cfg.dense_units {
                assert!(UNITS.contains(u));
            }
        }
    }

    #[test]
    fn single_trial_returns_that_config() {
        let result = random_search(&dataset(), &base(), 1, 1, 9).unwrap();
        assert_eq!(result.leaderboard.len(), 1);
        assert_eq!(result.best, result.leaderboard[0].config);
    }

    #[test]
    fn leaderboard_sorted_ascending_by_val_mse() {
        let result = random_search(&dataset(), &base(), 3, 1, 11).unwrap();
        let mses: Vec<f64> = result.leaderboard.iter().map(|e| e.val_mse).collect();
        for w in mses.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(random_search(&dataset(), &base(), 0, 1, 1).is_err());
    }
}
