//! `ggdpotts`: phantoms, joint deconvolution and segmentation runs,
//! baselines, metrics and display rendering.

mod baseline;
mod config;
mod error;
mod inputs;
mod metrics;
mod outdir;
mod render;
mod run;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::EXIT_OK;

#[derive(Debug, Parser)]
#[command(
    name = "ggdpotts",
    version,
    about = "Joint Bayesian deconvolution and segmentation with a GGD-Potts model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a phantom: reflectivity, labels, observation and PSF.
    Simulate(simulate::SimulateArgs),
    /// Run the hybrid Gibbs sampler on an observation.
    Run(run::RunArgs),
    /// Regularized least-squares reference reconstructions.
    Baseline(baseline::BaselineArgs),
    /// Score estimates against ground truth.
    Metrics(metrics::MetricsArgs),
    /// Log-compressed display of a grid.
    Render(render::RenderArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::execute(a),
        Command::Run(a) => run::execute(a),
        Command::Baseline(a) => baseline::execute(a),
        Command::Metrics(a) => metrics::execute(a),
        Command::Render(a) => render::execute(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.code == EXIT_OK { 1 } else { e.code as u8 })
        }
    }
}
