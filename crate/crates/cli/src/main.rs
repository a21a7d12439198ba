//! `aee`: generate a synthetic corpus, train a convolutional autoencoder,
//! flag whole-series outliers in its latent space, explain the encoder with
//! Grad-CAM / LIME / SHAP / LRP and their ensemble, score the explanations
//! by perturbation, and render SVG figures.
//!
//! One TOML config drives every stage; subcommand flags override single
//! values; the `AEE_OUT_DIR` environment variable overrides only the output
//! directory. Same config + same master seed reproduces every CSV/JSON/SVG
//! artifact byte for byte (run manifests carry wall time and are exempt).

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use aee_core::explain::Method;

use crate::commands::{detect, explain, gen, qm, render, report, train};
use crate::config::Resolved;
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "aee", version, about = "Latent-space outlier detection with ensemble explanations")]
struct Cli {
    /// Pipeline config file; defaults to ./pipeline.toml when present,
    /// else built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (wins over AEE_OUT_DIR and the config file).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled synthetic corpus and its manifest.
    Gen(gen::GenArgs),
    /// Train the convolutional autoencoder on the dataset.
    Train(train::TrainArgs),
    /// Cluster latent codes with DBSCAN and flag outliers.
    Detect(detect::DetectArgs),
    /// Attribute encoder outputs to time steps with one method.
    Explain(explain::ExplainArgs),
    /// Fuse the base explanation methods into one heatmap.
    Aee(explain::AeeArgs),
    /// Score explanation quality via perturbation distances.
    Qm(qm::QmArgs),
    /// Render an SVG figure from pipeline artifacts.
    Render(render::RenderArgs),
    /// Assemble the JSON and markdown run report.
    Report,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(args) => gen::apply(args, &mut config),
        Command::Train(args) => train::apply(args, &mut config),
        Command::Detect(args) => detect::apply(args, &mut config),
        Command::Qm(args) => qm::apply(args, &mut config)?,
        Command::Explain(_) | Command::Aee(_) | Command::Render(_) | Command::Report => {}
    }
    let resolved = Resolved::new(config, cli.out_dir)?;
    match &cli.command {
        Command::Gen(_) => gen::run(&resolved),
        Command::Train(_) => train::run(&resolved),
        Command::Detect(_) => detect::run(&resolved),
        Command::Explain(args) => {
            let method = Method::parse(&args.method)?;
            explain::run(&resolved, method, &args.target, &args.select, "explain")
        }
        Command::Aee(args) => {
            explain::run(&resolved, Method::Aee, &args.target, &args.select, "aee")
        }
        Command::Qm(_) => qm::run(&resolved),
        Command::Render(args) => render::run(&resolved, args),
        Command::Report => report::run(&resolved),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
