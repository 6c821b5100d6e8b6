//! `run`: the hybrid Gibbs sampler, its estimates and diagnostics.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use ggdpotts::convolution::CyclicBlurOperator;
use ggdpotts::diagnostics::{psrf_csv, psrf_report, PSRF_THRESHOLD};
use ggdpotts::estimators::{align_chains, estimate, histogram};
use ggdpotts::gibbs::{
    run_chains, FrozenBlocks, LabelOrder, ModelHyperparams, SamplerConfig, StepInit,
};

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
    "k",
    "chains",
    "noise_alpha",
    "noise_nu",
    "beta",
    "smoothing",
    "lenient",
    "hist_bins",
    "out",
    "n_iter",
    "n_burnin",
    "leapfrog_min",
    "leapfrog_max",
    "eps_init",
    "rwmh_delta_init",
    "adapt_window",
    "accept_band",
    "adapt_factor",
    "seed",
    "stream",
    "uncorrected_shape_ratio",
    "inverted_adapt_direction",
    "label_order",
    "frozen",
    "init_x",
    "init_labels",
    "init_shape",
    "init_scale",
];

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Observation grid.
    #[arg(long)]
    obs: Option<PathBuf>,
    /// PSF grid.
    #[arg(long)]
    psf: Option<PathBuf>,
    /// A `simulate` output directory; reads y.gpdm and psf.gpdm from it.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of classes.
    #[arg(long)]
    k: Option<usize>,
    /// Total iterations per chain, burn-in included [6000].
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in iterations [2000].
    #[arg(long)]
    burnin: Option<usize>,
    /// Parallel chains; chain c uses RNG stream `stream + c` [1].
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    #[arg(long)]
    leapfrog_min: Option<usize>,
    #[arg(long)]
    leapfrog_max: Option<usize>,
    /// Initial HMC step: `auto` or a positive value.
    #[arg(long)]
    eps_init: Option<EpsInit>,
    /// Initial variance of the shape proposal.
    #[arg(long)]
    rwmh_delta_init: Option<f64>,
    /// Iterations between step-size adaptations during burn-in.
    #[arg(long)]
    adapt_window: Option<usize>,
    /// Target acceptance band as LO,HI.
    #[arg(long)]
    accept_band: Option<Band>,
    #[arg(long)]
    adapt_factor: Option<f64>,
    /// Omit the proposal-density correction in the shape move.
    #[arg(long)]
    uncorrected_shape_ratio: bool,
    /// Shrink steps when acceptance is high and grow them when it is low.
    #[arg(long)]
    inverted_adapt_direction: bool,
    /// raster or checkerboard.
    #[arg(long)]
    label_order: Option<Order>,
    /// Blocks held fixed: `none` or a comma list of noise, shape, scale, labels, reflectivity.
    #[arg(long)]
    frozen: Option<Frozen>,
    #[arg(long)]
    noise_alpha: Option<f64>,
    #[arg(long)]
    noise_nu: Option<f64>,
    /// Potts granularity.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    /// Fall back to the mixture mean where a pixel's MAP class was never visited.
    #[arg(long)]
    lenient: bool,
    /// Bins per scalar histogram [50].
    #[arg(long)]
    hist_bins: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct EpsInit(StepInit);

impl FromStr for EpsInit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(StepInit::Auto));
        }
        s.parse::<f64>()
            .map(|v| Self(StepInit::Fixed(v)))
            .map_err(|_| format!("expected `auto` or a number, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy)]
struct Band(f64, f64);

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
        let p = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number {t:?}"))
        };
        Ok(Self(p(lo)?, p(hi)?))
    }
}

#[derive(Debug, Clone, Copy)]
struct Order(LabelOrder);

impl FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raster" => Ok(Self(LabelOrder::Raster)),
            "checkerboard" => Ok(Self(LabelOrder::Checkerboard)),
            _ => Err(format!("expected raster or checkerboard, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frozen(FrozenBlocks);

impl FromStr for Frozen {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut f = FrozenBlocks::default();
        if s.trim() == "none" {
            return Ok(Self(f));
        }
        for name in s.split(',').map(str::trim) {
            match name {
                "noise" => f.noise = true,
                "shape" => f.shape = true,
                "scale" => f.scale = true,
                "labels" => f.labels = true,
                "reflectivity" => f.reflectivity = true,
                _ => return Err(format!("unknown block {name:?}")),
            }
        }
        Ok(Self(f))
    }
}

fn rate(r: Option<f64>) -> String {
    r.map_or("n/a".into(), |v| format!("{v:.3}"))
}

struct Perm<'a>(&'a [usize]);

impl fmt::Display for Perm<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.0.iter().map(|k| (k + 1).to_string()).collect();
        write!(f, "[{}]", v.join(" "))
    }
}

pub fn execute(a: RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref(), "run", KEYS)?;
    let (obs, psf) = observation_and_psf(a.data.clone(), a.obs.clone(), a.psf.clone(), &cfg)?;
    let k = required(pick_opt(a.k, &cfg, "k")?, "--k")?;
    let chains = pick(a.chains, &cfg, "chains", 1usize)?;
    let hist_bins = pick(a.hist_bins, &cfg, "hist_bins", 50usize)?;
    let lenient = pick_switch(a.lenient, &cfg, "lenient")?;
    let out = required(pick_opt(a.out.clone(), &cfg, "out")?, "--out")?;
    if chains == 0 {
        return Err(CliError::usage("--chains must be at least 1"));
    }

    let mut hyper = ModelHyperparams::new(k)?;
    hyper.noise_alpha = pick(a.noise_alpha, &cfg, "noise_alpha", hyper.noise_alpha)?;
    hyper.noise_nu = pick(a.noise_nu, &cfg, "noise_nu", hyper.noise_nu)?;
    hyper.beta = pick(a.beta, &cfg, "beta", hyper.beta)?;
    hyper.smoothing = pick(a.smoothing, &cfg, "smoothing", hyper.smoothing)?;
    let hyper = hyper.validated()?;

    let n_iter = pick(a.iters, &cfg, "n_iter", 6000usize)?;
    let n_burnin = pick(a.burnin, &cfg, "n_burnin", 2000usize)?;
    let seed = pick(a.seed, &cfg, "seed", 0u64)?;
    let mut sc = SamplerConfig::new(n_iter, n_burnin, seed)?;
    sc.stream = pick(a.stream, &cfg, "stream", sc.stream)?;
    sc.leapfrog.0 = pick(a.leapfrog_min, &cfg, "leapfrog_min", sc.leapfrog.0)?;
    sc.leapfrog.1 = pick(a.leapfrog_max, &cfg, "leapfrog_max", sc.leapfrog.1)?;
    sc.step_init = pick(a.eps_init, &cfg, "eps_init", EpsInit(sc.step_init))?.0;
    sc.rwmh_delta_init = pick(
        a.rwmh_delta_init,
        &cfg,
        "rwmh_delta_init",
        sc.rwmh_delta_init,
    )?;
    sc.adapt_window = pick(a.adapt_window, &cfg, "adapt_window", sc.adapt_window)?;
    let band = pick(
        a.accept_band,
        &cfg,
        "accept_band",
        Band(sc.accept_band.0, sc.accept_band.1),
    )?;
    sc.accept_band = (band.0, band.1);
    sc.adapt_factor = pick(a.adapt_factor, &cfg, "adapt_factor", sc.adapt_factor)?;
    sc.uncorrected_shape_ratio =
        pick_switch(a.uncorrected_shape_ratio, &cfg, "uncorrected_shape_ratio")?;
    sc.inverted_adapt_direction =
        pick_switch(a.inverted_adapt_direction, &cfg, "inverted_adapt_direction")?;
    sc.label_order = pick(a.label_order, &cfg, "label_order", Order(sc.label_order))?.0;
    sc.frozen = pick(a.frozen, &cfg, "frozen", Frozen(sc.frozen))?.0;
    let sc = sc.validated()?;

    let op = CyclicBlurOperator::new(&psf.grid, obs.grid.dims())?;
    let dir = OutputDir::create(&out, "run")?;
    let mut outputs = run_chains(&obs.grid, &op, hyper, &sc, chains)?;
    let perms = align_chains(&mut outputs)?;
    let est = estimate(&outputs, lenient)?;

    dir.matrix("x_hat.gpdm", &est.x_hat)?;
    dir.labels("z_hat.gpdl", &est.z_hat)?;
    dir.text("scalars.csv", &est.scalars.to_csv())?;
    for (c, o) in outputs.iter().enumerate() {
        dir.text(&format!("traces_chain{}.csv", c + 1), &o.traces.to_csv())?;
    }

    let pooled = |f: &dyn Fn(&ggdpotts::gibbs::ChainTraces) -> &[f64]| -> Vec<f64> {
        outputs
            .iter()
            .flat_map(|o| o.traces.retained(f(&o.traces)).to_vec())
            .collect()
    };
    dir.text(
        "hist_sigma2.csv",
        &histogram(&pooled(&|t| &t.sigma2), hist_bins)?.to_csv(),
    )?;
    for j in 0..k {
        dir.text(
            &format!("hist_xi_{}.csv", j + 1),
            &histogram(&pooled(&|t| &t.shape[j]), hist_bins)?.to_csv(),
        )?;
        dir.text(
            &format!("hist_gamma_{}.csv", j + 1),
            &histogram(&pooled(&|t| &t.scale[j]), hist_bins)?.to_csv(),
        )?;
    }

    let mut summary = String::new();
    writeln!(
        summary,
        "chains {chains}, iterations {n_iter}, burn-in {n_burnin}, classes {k}"
    )
    .unwrap();
    for (c, o) in outputs.iter().enumerate() {
        let t = &o.traces;
        writeln!(
            summary,
            "chain {}: class permutation {}, hmc acceptance {}, final eps {:.4e}, non-finite trajectories {}",
            c + 1,
            Perm(&perms[c]),
            rate(t.hmc_counter().rate()),
            o.final_state.hmc_eps,
            t.hmc_nonfinite
        )
        .unwrap();
        for j in 0..k {
            writeln!(
                summary,
                "chain {}: class {} shape acceptance {}, final proposal variance {:.4e}",
                c + 1,
                j + 1,
                rate(t.rwmh_counter(j).rate()),
                o.final_state.rwmh_delta[j]
            )
            .unwrap();
        }
    }
    writeln!(
        summary,
        "MAP ties broken toward the lower class: {}",
        est.map_ties
    )
    .unwrap();
    writeln!(
        summary,
        "pixels using the mixture-mean fallback: {}",
        est.fallback_pixels.len()
    )
    .unwrap();

    let mut code = EXIT_OK;
    if chains >= 2 {
        let traces: Vec<_> = outputs.iter().map(|o| &o.traces).collect();
        let rows = psrf_report(&traces)?;
        dir.text("psrf.csv", &psrf_csv(&rows))?;
        for r in &rows {
            let verdict = if r.passes() { "ok" } else { "NOT CONVERGED" };
            writeln!(
                summary,
                "psrf {}: {} ({verdict})",
                r.variable,
                r.psrf.map_or("n/a".into(), |v| format!("{v:.4}"))
            )
            .unwrap();
        }
        let failing: Vec<&str> = rows
            .iter()
            .filter(|r| !r.passes())
            .map(|r| r.variable.as_str())
            .collect();
        if !failing.is_empty() {
            eprintln!(
                "warning: PSRF not below {PSRF_THRESHOLD} for {}",
                failing.join(", ")
            );
            code = EXIT_NOT_CONVERGED;
        }
    }
    dir.text("summary.txt", &summary)?;

    let mut entries = Vec::new();
    entries.extend(obs.manifest_entries("obs"));
    entries.extend(psf.manifest_entries("psf"));
    entries.extend([
        entry("k", k),
        entry("chains", chains),
        entry("noise_alpha", hyper.noise_alpha),
        entry("noise_nu", hyper.noise_nu),
        entry("beta", hyper.beta),
        entry("smoothing", hyper.smoothing),
        entry("lenient", lenient),
        entry("hist_bins", hist_bins),
    ]);
    entries.extend(sc.manifest_entries());
    dir.text(MANIFEST, &manifest("run", entries))?;
    dir.finish()?;

    print!("{}", est.scalars.to_csv());
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_types_parse_manifest_spellings() {
        let sc = SamplerConfig::new(10, 5, 1).unwrap();
        let m: std::collections::HashMap<_, _> = sc.manifest_entries().into_iter().collect();
        assert!(matches!(
            m["eps_init"].parse::<EpsInit>().unwrap().0,
            StepInit::Auto
        ));
        let b: Band = m["accept_band"].parse().unwrap();
        assert_eq!((b.0, b.1), sc.accept_band);
        assert_eq!(
            m["label_order"].parse::<Order>().unwrap().0,
            LabelOrder::Raster
        );
        assert_eq!(
            m["frozen"].parse::<Frozen>().unwrap().0,
            FrozenBlocks::default()
        );
    }

    #[test]
    fn fixed_steps_and_frozen_lists_round_trip() {
        let mut sc = SamplerConfig::new(10, 5, 1).unwrap();
        sc.step_init = StepInit::Fixed(0.0125);
        sc.frozen.noise = true;
        sc.frozen.labels = true;
        sc.label_order = LabelOrder::Checkerboard;
        let m: std::collections::HashMap<_, _> = sc.manifest_entries().into_iter().collect();
        assert_eq!(
            m["eps_init"].parse::<EpsInit>().unwrap().0,
            StepInit::Fixed(0.0125)
        );
        assert_eq!(m["frozen"].parse::<Frozen>().unwrap().0, sc.frozen);
        assert_eq!(
            m["label_order"].parse::<Order>().unwrap().0,
            LabelOrder::Checkerboard
        );
        assert!("sideways".parse::<Order>().is_err());
        assert!("noise,bogus".parse::<Frozen>().is_err());
        assert!("0.3".parse::<Band>().is_err());
    }
}
