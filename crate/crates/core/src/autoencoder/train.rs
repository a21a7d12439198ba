//! Training loop: stratified splitting, mini-batch gradient descent with
//! accumulated gradients, and per-epoch loss bookkeeping.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::autoencoder::config::{AEConfig, OptimizerKind};
use crate::autoencoder::model::{AEModel, Normalization};
use crate::error::{Error, Result};
use crate::nn::{mse, mse_grad, Mode, Network, Optimizer, Tensor};
use crate::seed::{derive_seed, hash_str, rng_from};
use crate::series::{common_length, TimeSeries};

#[cfg(test)]
use crate::series::Label;

const SPLIT_TAG: u64 = 0x73706c6974; // "split"
const DROP_TAG: u64 = 0x64726f70; // "drop"
const SHUF_TAG: u64 = 0x73687566; // "shuf"

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub test_mse: f64,
    pub split_sizes: [usize; 3],
    pub split_nok_fractions: [f64; 3],
    /// Wall time is inherently non-reproducible, so it stays out of
    /// serialized artifacts; run manifests carry timing instead.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Index split of a dataset into train/validation/test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Allocates `n` items to three fractions by largest remainder, so counts
/// always sum to `n` and a 0.6/0.2/0.2 split of 100 gives exactly 60/20/20.
fn allocate(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [(0.0f64, 0usize); 3];
    let mut used = 0;
    for i in 0..3 {
        let exact = fractions[i] * n as f64;
        counts[i] = exact.floor() as usize;
        remainders[i] = (exact - exact.floor(), i);
        used += counts[i];
    }
    // Ties favor earlier splits (train before val before test).
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for r in remainders.iter().take(n - used) {
        counts[r.1] += 1;
    }
    counts
}

/// Stratified split: each label stratum is shuffled with a seed derived from
/// the training seed, then allocated by the configured fractions, keeping
/// every split's NOK rate close to the corpus rate.
pub fn stratified_split(dataset: &[TimeSeries], fractions: &[f64; 3], seed: u64) -> Split {
    let mut strata: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in dataset.iter().enumerate() {
        strata[usize::from(s.is_nok())].push(i);
    }
    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (which, stratum) in strata.iter_mut().enumerate() {
        let mut rng = rng_from(derive_seed(seed, &[SPLIT_TAG, which as u64]));
        stratum.shuffle(&mut rng);
        let counts = allocate(stratum.len(), fractions);
        let (a, rest) = stratum.split_at(counts[0]);
        let (b, c) = rest.split_at(counts[1]);
        split.train.extend_from_slice(a);
        split.val.extend_from_slice(b);
        split.test.extend_from_slice(c);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}

fn nok_fraction(dataset: &[TimeSeries], indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let nok = indices.iter().filter(|&&i| dataset[i].is_nok()).count();
    nok as f64 / indices.len() as f64
}

struct Trainer<'a> {
    encoder: Network,
    decoder: Network,
    inputs: &'a [Tensor],
    enc_params: usize,
}

impl Trainer<'_> {
    fn params(&self) -> Vec<f64> {
        let mut p = self.encoder.export_params();
        p.extend(self.decoder.export_params());
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.encoder.import_params(&params[..self.enc_params])?;
        self.decoder.import_params(&params[self.enc_params..])
    }

    /// Forward + backward for one sample; returns (loss, flat gradient).
    fn sample_grad(&self, idx: usize, drop_rng: &mut rand_chacha::ChaCha8Rng) -> Result<(f64, Vec<f64>)> {
        let input = &self.inputs[idx];
        let enc_trace = self.encoder.forward_trace(input, Mode::Train, Some(drop_rng))?;
        let latent = enc_trace.output()?.reshaped(vec![enc_trace.output()?.len()])?;
        let dec_trace = self.decoder.forward_trace(&latent, Mode::Train, Some(drop_rng))?;
        let output = dec_trace.output()?;
        let target = input.reshaped(output.shape().to_vec())?;
        let loss = mse(output, &target)?;
        let upstream = mse_grad(output, &target)?;
        let (d_latent, dec_grads) = self.decoder.backward(&dec_trace, &upstream)?;
        let d_latent = d_latent.reshaped(enc_trace.output()?.shape().to_vec())?;
        let (_, enc_grads) = self.encoder.backward(&enc_trace, &d_latent)?;
        let mut flat = self.encoder.flatten_grads(&enc_grads)?;
        flat.extend(self.decoder.flatten_grads(&dec_grads)?);
        Ok((loss, flat))
    }

    fn mean_loss(&self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for &i in indices {
            let input = &self.inputs[i];
            let latent = self.encoder.forward(input)?;
            let latent = latent.reshaped(vec![latent.len()])?;
            let output = self.decoder.forward(&latent)?;
            sum += mse(&output, &input.reshaped(output.shape().to_vec())?)?;
        }
        Ok(sum / indices.len() as f64)
    }
}

/// Trains a fresh model on the full labeled mix (NOK instances are kept in,
/// matching the intended deployment where anomalies are rare but present).
pub fn train(dataset: &[TimeSeries], config: &AEConfig) -> Result<(AEModel, TrainReport)> {
    config.validate()?;
    let started = std::time::Instant::now();
    let length = common_length(dataset)?;
    if length != config.input_length {
        return Err(Error::Data(format!(
            "dataset length {length} does not match configured input length {}",
            config.input_length
        )));
    }

    let seed = config.training.seed;
    let split = stratified_split(dataset, &config.training.split, seed);
    let normalization = Normalization::PerSeriesMinMax;
    let inputs: Vec<Tensor> = dataset
        .iter()
        .map(|s| {
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("series {} contains non-finite values", s.id)));
            }
            let (n, _) = normalization.apply(&s.values);
            Tensor::from_vec(vec![1, length], n)
        })
        .collect::<Result<_>>()?;

    let mut rng = rng_from(derive_seed(seed, &[hash_str("init")]));
    let encoder = Network::from_specs(&config.encoder_specs()?, &mut rng)?;
    let decoder = Network::from_specs(&config.decoder_specs()?, &mut rng)?;
    let enc_params = encoder.param_count();
    let mut trainer = Trainer { encoder, decoder, inputs: &inputs, enc_params };

    let total_params = trainer.params().len();
    let mut optimizer = match config.training.optimizer {
        OptimizerKind::Sgd => Optimizer::sgd(config.training.learning_rate)?,
        OptimizerKind::Adam => Optimizer::adam(config.training.learning_rate, total_params)?,
    };

    let mut train_mse = Vec::with_capacity(config.training.epochs);
    let mut val_mse = Vec::with_capacity(config.training.epochs);
    let mut order = split.train.clone();

    for epoch in 0..config.training.epochs {
        let mut shuffle_rng = rng_from(derive_seed(seed, &[SHUF_TAG, epoch as u64]));
        order.shuffle(&mut shuffle_rng);
        let mut drop_rng = rng_from(derive_seed(seed, &[DROP_TAG, epoch as u64]));

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.training.batch_size) {
            let mut grad_sum = vec![0.0; total_params];
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (loss, grad) = trainer.sample_grad(idx, &mut drop_rng)?;
                batch_loss += loss;
                for (a, g) in grad_sum.iter_mut().zip(&grad) {
                    *a += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grad_sum.iter_mut() {
                *g *= scale;
            }
            epoch_loss += batch_loss;
            let mut params = trainer.params();
            optimizer.step(&mut params, &grad_sum)?;
            trainer.set_params(&params)?;
        }
        let epoch_train = if order.is_empty() { 0.0 } else { epoch_loss / order.len() as f64 };
        let epoch_val = trainer.mean_loss(&split.val)?;
        if !epoch_train.is_finite() || !epoch_val.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        train_mse.push(epoch_train);
        val_mse.push(epoch_val);
    }

    let test_mse = trainer.mean_loss(&split.test)?;
    if !test_mse.is_finite() {
        return Err(Error::TrainingDiverged { epoch: config.training.epochs });
    }

    let report = TrainReport {
        epochs_run: config.training.epochs,
        train_mse,
        val_mse,
        test_mse,
        split_sizes: [split.train.len(), split.val.len(), split.test.len()],
        split_nok_fractions: [
            nok_fraction(dataset, &split.train),
            nok_fraction(dataset, &split.val),
            nok_fraction(dataset, &split.test),
        ],
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let model = AEModel::from_parts(
        trainer.encoder,
        trainer.decoder,
        config.input_length,
        config.latent_dim,
        normalization,
    )?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::config::ConvBlock;

    fn tiny_config(epochs: usize) -> AEConfig {
        let mut cfg = AEConfig {
            input_length: 32,
            conv_blocks: vec![ConvBlock { filters: 4, kernel_size: 5, dropout: None, pool: true }],
            ..AEConfig::default()
        };
        cfg.training.epochs = epochs;
        cfg.training.batch_size = 4;
        cfg.training.learning_rate = 2e-3;
        cfg
    }

    fn toy_dataset(n: usize, nok_every: usize) -> Vec<TimeSeries> {
        (0..n)
            .map(|i| {
                let values: Vec<f64> =
                    (0..32).map(|j| (j as f64 * 0.4 + i as f64 * 0.01).sin()).collect();
                let label = if nok_every > 0 && i % nok_every == 0 { Label::Nok } else { Label::Ok };
                TimeSeries::new(format!("s{i}"), values).with_label(label)
            })
            .collect()
    }

    #[test]
    fn split_of_100_at_60_20_20_is_exact() {
        let data = toy_dataset(100, 0);
        let split = stratified_split(&data, &[0.6, 0.2, 0.2], 1);
        assert_eq!(split.train.len(), 60);
        assert_eq!(split.val.len(), 20);
        assert_eq!(split.test.len(), 20);
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn stratification_keeps_nok_rate_close_in_each_split() {
        let data = toy_dataset(200, 10); // 20 NOK of 200
        let split = stratified_split(&data, &[0.6, 0.2, 0.2], 7);
        for part in [&split.train, &split.val, &split.test] {
            let f = nok_fraction(&data, part);
            assert!((f - 0.1).abs() < 0.02, "nok rate {f}");
        }
    }

    #[test]
    fn allocation_sums_and_handles_tiny_strata() {
        assert_eq!(allocate(1, &[0.6, 0.2, 0.2]), [1, 0, 0]);
        assert_eq!(allocate(2, &[0.6, 0.2, 0.2]), [1, 1, 0]);
        assert_eq!(allocate(34, &[0.6, 0.2, 0.2]).iter().sum::<usize>(), 34);
    }

    #[test]
    fn identical_series_converge_to_small_mse() {
        let series = TimeSeries::new("base", (0..32).map(|j| (j as f64 * 0.35).sin()).collect());
        let data: Vec<TimeSeries> = (0..10)
            .map(|i| TimeSeries::new(format!("s{i}"), series.values.clone()).with_label(Label::Ok))
            .collect();
        let mut cfg = tiny_config(500);
        cfg.conv_blocks[0].filters = 8;
        cfg.training.batch_size = 10;
        cfg.training.learning_rate = 1e-2;
        let (_, report) = train(&data, &cfg).unwrap();
        let last = *report.train_mse.last().unwrap();
        assert!(last <= 1e-4, "final train mse {last}");
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = toy_dataset(20, 7);
        let cfg = tiny_config(3);
        let (m1, r1) = train(&data, &cfg).unwrap();
        let (m2, r2) = train(&data, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.train_mse, r2.train_mse);
        assert_eq!(r1.val_mse, r2.val_mse);
        assert_eq!(r1.test_mse, r2.test_mse);
    }

    #[test]
    fn length_mismatch_is_a_data_error() {
        let data = toy_dataset(10, 0);
        let mut cfg = tiny_config(1);
        cfg.input_length = 64;
        assert!(matches!(train(&data, &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn losses_are_finite_every_epoch() {
        let data = toy_dataset(16, 5);
        let (_, report) = train(&data, &tiny_config(5)).unwrap();
        assert_eq!(report.train_mse.len(), 5);
        assert!(report.train_mse.iter().all(|l| l.is_finite()));
        assert!(report.val_mse.iter().all(|l| l.is_finite()));
    }
}
