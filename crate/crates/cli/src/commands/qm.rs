//! `aee qm`: the perturbation quality protocol over every configured
//! method, with per-instance distances and stratified summaries.

use clap::Args;

use aee_core::explain::Method;
use aee_core::io::{write_json, write_qm_results_csv, write_qm_summary_csv};
use aee_core::quality::{evaluate, PerturbStrategy};

use crate::commands::{load_dataset, load_trained_model};
use crate::config::{PipelineConfig, Resolved};
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactLog;

#[derive(Debug, Args)]
pub struct QmArgs {
    /// Methods to evaluate (repeatable); defaults to the config list.
    #[arg(long = "method")]
    pub methods: Vec<String>,
    /// Fraction of time steps to perturb, in (0, 1].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// One of: shuffle, zero, mean.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Random-baseline draws per instance.
    #[arg(long)]
    pub trials: Option<usize>,
    /// OK instances sampled into the evaluation; 0 keeps all.
    #[arg(long)]
    pub ok_sample: Option<usize>,
}

pub fn apply(args: &QmArgs, config: &mut PipelineConfig) -> CliResult<()> {
    if !args.methods.is_empty() {
        let methods: Result<Vec<Method>, _> =
            args.methods.iter().map(|m| Method::parse(m)).collect();
        config.qm.methods = methods.map_err(CliError::Core)?;
    }
    if let Some(fraction) = args.fraction {
        config.qm.fraction = fraction;
    }
    if let Some(strategy) = &args.strategy {
        config.qm.strategy = PerturbStrategy::parse(strategy)?;
    }
    if let Some(trials) = args.trials {
        config.qm.trials = trials;
    }
    if let Some(ok_sample) = args.ok_sample {
        config.qm.ok_sample = ok_sample;
    }
    Ok(())
}

pub fn run(resolved: &Resolved) -> CliResult<()> {
    let mut log = ArtifactLog::new();
    let dataset = load_dataset(resolved)?;
    let model = load_trained_model(resolved)?;
    let settings = resolved.explainer_settings();
    let config = resolved.qm_config();
    let report = evaluate(&model, &dataset, &resolved.config.qm.methods, &settings, &config)?;

    let results_path = resolved.out_dir.join("qm_results.csv");
    write_qm_results_csv(&results_path, &report.results)?;
    log.record(&results_path);

    let summary_path = resolved.out_dir.join("qm_summary.csv");
    write_qm_summary_csv(&summary_path, &report.summary)?;
    log.record(&summary_path);

    let report_path = resolved.out_dir.join("qm_report.json");
    write_json(&report_path, &report)?;
    log.record(&report_path);

    log.finish(resolved, "qm")?;
    let satisfied = report.results.iter().filter(|r| r.ordering_satisfied).count();
    println!(
        "evaluated {} methods on {} OK + {} NOK instances; ordering satisfied for {}/{} results",
        resolved.config.qm.methods.len(),
        report.ok_evaluated,
        report.nok_evaluated,
        satisfied,
        report.results.len()
    );
    Ok(())
}
