//! `aee gen`: synthesize the labeled corpus and write it with its manifest.

use clap::Args;

use aee_core::datagen::generate_corpus;
use aee_core::io::{write_dataset_ndjson, write_json};

use crate::config::{PipelineConfig, Resolved};
use crate::error::CliResult;
use crate::manifest::ArtifactLog;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of series to generate.
    #[arg(long)]
    pub size: Option<usize>,
    /// Samples per series.
    #[arg(long)]
    pub length: Option<usize>,
    /// Fraction of anomalous series, in [0, 1).
    #[arg(long)]
    pub nok_rate: Option<f64>,
    /// Gaussian noise level added to every sample.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

pub fn apply(args: &GenArgs, config: &mut PipelineConfig) {
    if let Some(size) = args.size {
        config.generator.size = size;
    }
    if let Some(length) = args.length {
        config.generator.length = length;
    }
    if let Some(rate) = args.nok_rate {
        config.generator.nok_rate = rate;
    }
    if let Some(sigma) = args.noise_sigma {
        config.generator.noise_sigma = sigma;
    }
}

pub fn run(resolved: &Resolved) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let gen_config = resolved.generator_config();
    let (dataset, manifest) = generate_corpus(&gen_config)?;

    let dataset_path = resolved.dataset_path();
    write_dataset_ndjson(&dataset_path, &dataset)?;
    log.record(&dataset_path);

    let manifest_path = resolved.out_dir.join("corpus_manifest.json");
    write_json(&manifest_path, &manifest)?;
    log.record(&manifest_path);

    log.finish(resolved, "gen")?;
    println!(
        "generated {} series of length {} ({} NOK) -> {}",
        dataset.len(),
        gen_config.length,
        manifest.n_nok,
        dataset_path.display()
    );
    Ok(())
}
