//! `aee train`: fit the autoencoder on the dataset and store the model.

use clap::Args;

use aee_core::autoencoder::{save_model, train};
use aee_core::io::write_json;

use crate::commands::load_dataset;
use crate::config::{PipelineConfig, Resolved};
use crate::error::CliResult;
use crate::manifest::ArtifactLog;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Bottleneck width; the paper-style setting is 3.
    #[arg(long)]
    pub latent_dim: Option<usize>,
}

pub fn apply(args: &TrainArgs, config: &mut PipelineConfig) {
    if let Some(epochs) = args.epochs {
        config.autoencoder.training.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.autoencoder.training.batch_size = batch;
    }
    if let Some(lr) = args.learning_rate {
        config.autoencoder.training.learning_rate = lr;
    }
    if let Some(dim) = args.latent_dim {
        config.autoencoder.latent_dim = dim;
    }
}

pub fn run(resolved: &Resolved) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let dataset = load_dataset(resolved)?;
    let config = resolved.autoencoder_config();
    let (model, report) = train(&dataset, &config)?;

    let model_path = resolved.model_path();
    save_model(&model, &model_path)?;
    log.record(&model_path);

    let report_path = resolved.out_dir.join("train_report.json");
    write_json(&report_path, &report)?;
    log.record(&report_path);

    log.finish(resolved, "train")?;
    println!(
        "trained {} epochs on {} series: train mse {:.6}, val mse {:.6}, test mse {:.6}",
        report.epochs_run,
        dataset.len(),
        report.train_mse.last().copied().unwrap_or(f64::NAN),
        report.val_mse.last().copied().unwrap_or(f64::NAN),
        report.test_mse
    );
    Ok(())
}
