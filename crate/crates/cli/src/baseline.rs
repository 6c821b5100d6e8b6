//! `baseline`: ℓ2 and ℓ1 regularized reconstructions.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use ggdpotts::baselines::{auto_lambda, l1_deconvolve, l2_deconvolve, L1Options};
use ggdpotts::convolution::CyclicBlurOperator;

use crate::config::{pick, pick_opt, pick_switch};
use crate::error::{CliError, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::inputs::{entry, load_config, manifest, observation_and_psf, required};
use crate::outdir::{OutputDir, MANIFEST};

const KEYS: &[&str] = &[
    "data",
    "obs",
    "psf",
    "obs_fnv1a64",
    "psf_fnv1a64",
    "method",
    "lambda",
    "lambda_value",
    "max_iter",
    "tol",
    "accelerated",
    "power_iterations",
    "out",
];

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    obs: Option<PathBuf>,
    #[arg(long)]
    psf: Option<PathBuf>,
    /// A `simulate` output directory; reads y.gpdm and psf.gpdm from it.
    #[arg(long)]
    data: Option<PathBuf>,
    /// l2 (closed form) or l1 (proximal gradient).
    #[arg(long)]
    method: Option<String>,
    /// Regularization weight, or `auto` for 0.1·max|Hᵀy|.
    #[arg(long)]
    lambda: Option<Lambda>,
    /// l1: iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// l1: stop when the relative objective decrease falls below this.
    #[arg(long)]
    tol: Option<f64>,
    /// l1: Nesterov-accelerated iterations.
    #[arg(long)]
    accelerated: bool,
    /// l1: power iterations used to bound the step.
    #[arg(long)]
    power_iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lambda {
    Auto,
    Value(f64),
}

impl FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Value)
            .map_err(|_| format!("expected `auto` or a number, got {s:?}"))
    }
}

pub fn execute(a: BaselineArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref(), "baseline", KEYS)?;
    let (obs, psf) = observation_and_psf(a.data, a.obs, a.psf, &cfg)?;
    let method = required(pick_opt(a.method, &cfg, "method")?, "--method")?;
    if method != "l1" && method != "l2" {
        return Err(CliError::usage(format!(
            "--method must be l1 or l2, got {method:?}"
        )));
    }
    let lambda_arg = required(pick_opt(a.lambda, &cfg, "lambda")?, "--lambda")?;
    let d = L1Options::default();
    let opts = L1Options {
        max_iter: pick(a.max_iter, &cfg, "max_iter", d.max_iter)?,
        tol: pick(a.tol, &cfg, "tol", d.tol)?,
        accelerated: pick_switch(a.accelerated, &cfg, "accelerated")?,
        power_iterations: pick(
            a.power_iterations,
            &cfg,
            "power_iterations",
            d.power_iterations,
        )?,
    };
    let out = required(pick_opt(a.out, &cfg, "out")?, "--out")?;

    let op = CyclicBlurOperator::new(&psf.grid, obs.grid.dims())?;
    let lambda = match lambda_arg {
        Lambda::Auto => auto_lambda(&obs.grid, &op)?,
        Lambda::Value(v) => v,
    };
    let dir = OutputDir::create(&out, "baseline")?;
    let mut entries = Vec::new();
    entries.extend(obs.manifest_entries("obs"));
    entries.extend(psf.manifest_entries("psf"));
    entries.push(entry("method", &method));
    entries.push(entry(
        "lambda",
        if lambda_arg == Lambda::Auto {
            "auto".to_string()
        } else {
            lambda.to_string()
        },
    ));
    entries.push(entry("lambda_value", lambda));

    let mut code = EXIT_OK;
    if method == "l2" {
        let x = l2_deconvolve(&obs.grid, &op, lambda)?;
        dir.matrix("x_hat.gpdm", &x)?;
    } else {
        let r = l1_deconvolve(&obs.grid, &op, lambda, &opts)?;
        dir.matrix("x_hat.gpdm", &r.x)?;
        dir.text("objective.csv", &r.objective_csv())?;
        entries.extend([
            entry("max_iter", opts.max_iter),
            entry("tol", opts.tol),
            entry("accelerated", opts.accelerated),
            entry("power_iterations", opts.power_iterations),
        ]);
        let iters = r.objective.len().saturating_sub(1);
        if r.converged {
            println!(
                "baseline l1: converged after {iters} iterations, objective {:.6e}",
                r.objective[iters]
            );
        } else {
            eprintln!(
                "warning: l1 did not reach tol {} within {} iterations",
                opts.tol, opts.max_iter
            );
            code = EXIT_NOT_CONVERGED;
        }
    }
    dir.text(MANIFEST, &manifest("baseline", entries))?;
    dir.finish()?;
    println!("baseline {method}: lambda {lambda} -> {}", out.display());
    Ok(code)
}
