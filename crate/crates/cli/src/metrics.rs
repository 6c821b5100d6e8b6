//! `metrics`: every score computable from the grids supplied.

use std::path::{Path, PathBuf};

use clap::Args;
use ggdpotts::grid::{write_text, RegionMask};
use ggdpotts::metrics::{
    cnr, isnr, mssim, nrmse, overall_accuracy, psnr, resolution_gain, MetricsReport, RG_THRESHOLD,
};

use crate::config::pick_opt;
use crate::error::{CliError, EXIT_OK};
use crate::inputs::{load_config, read_grid, read_label_field, with_path, RegionArg};

const KEYS: &[&str] = &[
    "data",
    "run",
    "truth",
    "labels",
    "obs",
    "est",
    "est_labels",
    "cnr_region",
    "report",
];

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// A `simulate` directory: supplies --truth, --labels and --obs.
    #[arg(long)]
    data: Option<PathBuf>,
    /// A `run` or `baseline` directory: supplies --est and, if present, --est-labels.
    #[arg(long)]
    run: Option<PathBuf>,
    /// True reflectivity.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// True labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Observation.
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Estimated reflectivity.
    #[arg(long)]
    est: Option<PathBuf>,
    /// Estimated labels.
    #[arg(long)]
    est_labels: Option<PathBuf>,
    /// Two regions ROW0,COL0,HEIGHT,WIDTH for CNR, measured on --est (else --obs).
    #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
    cnr_region: Option<Vec<RegionArg>>,
    /// Also write `metric,value` CSV here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Explicit path, else `dir/name` when that file exists.
fn resolve(flag: Option<PathBuf>, dir: Option<&Path>, name: &str) -> Option<PathBuf> {
    flag.or_else(|| dir.map(|d| d.join(name)).filter(|p| p.exists()))
}

pub fn execute(a: MetricsArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref(), "metrics", KEYS)?;
    let data = pick_opt(a.data, &cfg, "data")?;
    let run = pick_opt(a.run, &cfg, "run")?;
    let truth = resolve(pick_opt(a.truth, &cfg, "truth")?, data.as_deref(), "x.gpdm");
    let labels = resolve(
        pick_opt(a.labels, &cfg, "labels")?,
        data.as_deref(),
        "z.gpdl",
    );
    let obs = resolve(pick_opt(a.obs, &cfg, "obs")?, data.as_deref(), "y.gpdm");
    let est = resolve(pick_opt(a.est, &cfg, "est")?, run.as_deref(), "x_hat.gpdm");
    let est_labels = resolve(
        pick_opt(a.est_labels, &cfg, "est_labels")?,
        run.as_deref(),
        "z_hat.gpdl",
    );
    let regions = match a.cnr_region {
        Some(v) => Some(v),
        None => match cfg.get("cnr_region") {
            None => None,
            Some(s) => Some(
                s.split_whitespace()
                    .map(|t| t.parse::<RegionArg>().map_err(CliError::usage))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        },
    };
    if regions.as_ref().is_some_and(|r| r.len() != 2) {
        return Err(CliError::usage("cnr regions: expected exactly two"));
    }
    let report_path = pick_opt(a.report, &cfg, "report")?;

    let truth = truth.map(|p| read_grid(&p)).transpose()?;
    let obs = obs.map(|p| read_grid(&p)).transpose()?;
    let est = est.map(|p| read_grid(&p)).transpose()?;
    let labels = labels.map(|p| read_label_field(&p)).transpose()?;
    let est_labels = est_labels.map(|p| read_label_field(&p)).transpose()?;

    let mut r = MetricsReport::default();
    if let (Some(x), Some(xh)) = (&truth, &est) {
        r.nrmse = Some(nrmse(x, xh)?);
        r.psnr = Some(psnr(x, xh)?);
        r.mssim = Some(mssim(x, xh)?);
        if let Some(y) = &obs {
            r.isnr = Some(isnr(x, y, xh)?);
        }
    }
    if let (Some(z), Some(zh)) = (&labels, &est_labels) {
        r.oa = Some(overall_accuracy(z, zh)?);
    }
    if let (Some(y), Some(xh)) = (&obs, &est) {
        r.rg = Some(resolution_gain(y, xh, RG_THRESHOLD)?);
    }
    if let Some(rs) = &regions {
        let grid = est
            .as_ref()
            .or(obs.as_ref())
            .ok_or_else(|| CliError::usage("CNR needs --est or --obs"))?;
        let m = |r: &RegionArg| RegionMask::new(r.row0, r.col0, r.height, r.width);
        r.cnr = Some(cnr(grid, &m(&rs[0]), &m(&rs[1]))?);
    }
    if r == MetricsReport::default() {
        return Err(CliError::usage(
            "nothing to compute: give an estimate plus truth, labels, observation or CNR regions",
        ));
    }
    print!("{}", r.to_text());
    if let Some(p) = report_path {
        write_text(&p, &r.to_csv()).map_err(|e| with_path(&p, e))?;
    }
    Ok(EXIT_OK)
}
