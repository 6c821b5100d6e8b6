//! `render`: log-compressed display of a grid.

use std::path::PathBuf;

use clap::Args;
use ggdpotts::display::{bmode_render, DEFAULT_DYNAMIC_RANGE_DB};
use ggdpotts::grid::{write_csv, write_matrix};

use crate::config::{pick, pick_opt};
use crate::error::{CliError, EXIT_OK};
use crate::inputs::{load_config, read_grid, required, with_path};

const KEYS: &[&str] = &["in", "dr", "out"];

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Grid to display.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Dynamic range in dB.
    #[arg(long)]
    dr: Option<f64>,
    /// Output grid; written as CSV when the name ends in `.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn execute(a: RenderArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref(), "render", KEYS)?;
    let input = required(pick_opt(a.input, &cfg, "in")?, "--in")?;
    let dr = pick(a.dr, &cfg, "dr", DEFAULT_DYNAMIC_RANGE_DB)?;
    let out = required(pick_opt(a.out, &cfg, "out")?, "--out")?;
    let img = bmode_render(&read_grid(&input)?, dr).map_err(|e| with_path(&input, e))?;
    // Single files are written through a temporary and renamed into place.
    let written = if out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        write_csv(&out, &img)
    } else {
        write_matrix(&out, &img)
    };
    written.map_err(|e| with_path(&out, e))?;
    Ok(EXIT_OK)
}
