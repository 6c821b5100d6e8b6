//! `simulate`: phantom generation.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use ggdpotts::convolution::gaussian_psf;
use ggdpotts::distributions::GgdClassParams;
use ggdpotts::phantoms::{simulate, PhantomSpec, Preset, Region, Sweep};

use crate::config::{pick, pick_opt, Config};
use crate::error::{CliError, EXIT_OK};
use crate::inputs::{entry, load_config, manifest, required, Dims};
use crate::outdir::{OutputDir, MANIFEST};

const KEYS: &[&str] = &[
    "preset",
    "spec",
    "sweep",
    "ratio",
    "shape",
    "scale",
    "dims",
    "bsnr",
    "seed",
    "psf_size",
    "psf_variance",
    "out",
    "sigma2",
];

/// Geometry file written next to every phantom.
pub const PHANTOM_FILE: &str = "phantom.txt";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// group1, group2, group3, oa-sweep or iid.
    #[arg(long)]
    preset: Option<String>,
    /// Geometry file with `dims`, `class = SHAPE SCALE` and `region = ...` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// oa-sweep: which parameter differs between the bands (shape or scale).
    #[arg(long)]
    sweep: Option<String>,
    /// oa-sweep: ratio of the second band's parameter to the first's.
    #[arg(long)]
    ratio: Option<f64>,
    /// iid: GGD shape.
    #[arg(long)]
    shape: Option<f64>,
    /// iid: GGD scale.
    #[arg(long)]
    scale: Option<f64>,
    /// Grid size as ROWSxCOLS; presets have their own defaults.
    #[arg(long)]
    dims: Option<Dims>,
    /// Blurred-signal-to-noise ratio in dB.
    #[arg(long)]
    bsnr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Side of the Gaussian PSF (odd).
    #[arg(long)]
    psf_size: Option<usize>,
    /// Variance of the Gaussian PSF in pixels².
    #[arg(long)]
    psf_variance: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_preset(name: &str, cfg: &Config, a: &SimulateArgs) -> Result<Preset, CliError> {
    Ok(match name {
        "group1" => Preset::Group1,
        "group2" => Preset::Group2,
        "group3" => Preset::Group3,
        "oa-sweep" => {
            let sweep = match pick(a.sweep.clone(), cfg, "sweep", "shape".to_string())?.as_str() {
                "shape" => Sweep::Shape,
                "scale" => Sweep::Scale,
                s => {
                    return Err(CliError::usage(format!(
                        "--sweep must be shape or scale, got {s:?}"
                    )))
                }
            };
            Preset::OaSweep {
                sweep,
                ratio: required(pick_opt(a.ratio, cfg, "ratio")?, "--ratio")?,
            }
        }
        "iid" => Preset::Iid {
            shape: required(pick_opt(a.shape, cfg, "shape")?, "--shape")?,
            scale: required(pick_opt(a.scale, cfg, "scale")?, "--scale")?,
        },
        other => return Err(CliError::usage(format!("unknown preset {other:?}"))),
    })
}

fn default_dims(p: &Preset) -> Dims {
    let (rows, cols) = match p {
        Preset::Group1 => (128, 128),
        Preset::Group2 => (100, 100),
        Preset::Group3 => (275, 75),
        Preset::OaSweep { .. } => (64, 64),
        Preset::Iid { .. } => (50, 50),
    };
    Dims { rows, cols }
}

fn preset_entries(p: &Preset) -> Vec<(String, String)> {
    let mut v = vec![entry("preset", p.name())];
    match *p {
        Preset::OaSweep { sweep, ratio } => {
            v.push(entry(
                "sweep",
                if sweep == Sweep::Shape {
                    "shape"
                } else {
                    "scale"
                },
            ));
            v.push(entry("ratio", ratio));
        }
        Preset::Iid { shape, scale } => {
            v.push(entry("shape", shape));
            v.push(entry("scale", scale));
        }
        _ => {}
    }
    v
}

fn numbers<T: std::str::FromStr>(s: &str, n: usize, what: &str) -> Result<Vec<T>, CliError> {
    let v: Vec<T> = s
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("bad numbers in {what} {s:?}")))?;
    if v.len() != n {
        return Err(CliError::usage(format!(
            "{what} {s:?}: expected {n} values"
        )));
    }
    Ok(v)
}

/// Classes are 1-based in the file and 0-based in memory.
fn parse_region(s: &str) -> Result<Region, CliError> {
    let (kind, rest) = s
        .trim()
        .split_once(char::is_whitespace)
        .unwrap_or((s.trim(), ""));
    let class_of = |k: f64| -> Result<usize, CliError> {
        if k >= 1.0 && k.fract() == 0.0 {
            Ok(k as usize - 1)
        } else {
            Err(CliError::usage(format!(
                "region {s:?}: class must be a positive integer"
            )))
        }
    };
    Ok(match kind {
        "background" => {
            let v = numbers::<f64>(rest, 1, "region")?;
            Region::Background {
                class: class_of(v[0])?,
            }
        }
        "disc" => {
            let v = numbers::<f64>(rest, 4, "region")?;
            Region::Disc {
                center: (v[0], v[1]),
                radius: v[2],
                class: class_of(v[3])?,
            }
        }
        "ellipse" => {
            let v = numbers::<f64>(rest, 5, "region")?;
            Region::Ellipse {
                center: (v[0], v[1]),
                semi_axes: (v[2], v[3]),
                class: class_of(v[4])?,
            }
        }
        "rectangle" => {
            let v = numbers::<usize>(rest, 5, "region")?;
            if v[4] == 0 {
                return Err(CliError::usage(format!(
                    "region {s:?}: class must be a positive integer"
                )));
            }
            Region::Rectangle {
                row0: v[0],
                col0: v[1],
                height: v[2],
                width: v[3],
                class: v[4] - 1,
            }
        }
        _ => return Err(CliError::usage(format!("unknown region kind {kind:?}"))),
    })
}

/// Reads a geometry file; `dims_override` replaces its `dims` line.
pub fn read_spec_file(
    path: &std::path::Path,
    dims_override: Option<Dims>,
) -> Result<PhantomSpec, CliError> {
    let cfg = Config::load(path)?;
    cfg.check_keys(&["dims", "class", "region"])?;
    let dims = match dims_override {
        Some(d) => d,
        None => required(cfg.parsed::<Dims>("dims")?, "`dims` in the geometry file")?,
    };
    let classes = cfg
        .all("class")
        .iter()
        .map(|s| {
            let v = numbers::<f64>(s, 2, "class")?;
            Ok(GgdClassParams::new(v[0], v[1])?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let regions = cfg
        .all("region")
        .iter()
        .map(|s| parse_region(s))
        .collect::<Result<Vec<_>, _>>()?;
    if classes.is_empty() || regions.is_empty() {
        return Err(CliError::usage(format!(
            "{}: needs at least one class and one region",
            path.display()
        )));
    }
    if let Some(bad) = regions
        .iter()
        .map(region_class)
        .find(|&k| k >= classes.len())
    {
        return Err(CliError::usage(format!(
            "{}: region uses class {} of {}",
            path.display(),
            bad + 1,
            classes.len()
        )));
    }
    Ok(PhantomSpec {
        rows: dims.rows,
        cols: dims.cols,
        classes,
        regions,
    })
}

fn region_class(r: &Region) -> usize {
    match *r {
        Region::Background { class }
        | Region::Disc { class, .. }
        | Region::Ellipse { class, .. }
        | Region::Rectangle { class, .. } => class,
    }
}

/// Inverse of [`read_spec_file`].
pub fn spec_file_text(spec: &PhantomSpec) -> String {
    let mut s = format!("dims = {}x{}\n", spec.rows, spec.cols);
    for c in &spec.classes {
        writeln!(s, "class = {} {}", c.shape(), c.scale()).unwrap();
    }
    for r in &spec.regions {
        let line = match *r {
            Region::Background { class } => format!("background {}", class + 1),
            Region::Disc {
                center,
                radius,
                class,
            } => format!("disc {} {} {} {}", center.0, center.1, radius, class + 1),
            Region::Ellipse {
                center,
                semi_axes,
                class,
            } => {
                format!(
                    "ellipse {} {} {} {} {}",
                    center.0,
                    center.1,
                    semi_axes.0,
                    semi_axes.1,
                    class + 1
                )
            }
            Region::Rectangle {
                row0,
                col0,
                height,
                width,
                class,
            } => {
                format!("rectangle {row0} {col0} {height} {width} {}", class + 1)
            }
        };
        writeln!(s, "region = {line}").unwrap();
    }
    s
}

pub fn execute(a: SimulateArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref(), "simulate", KEYS)?;
    // A manifest records both the preset and the resolved dims; flags win.
    let preset_name = pick_opt(a.preset.clone(), &cfg, "preset")?;
    let spec_path = pick_opt(a.spec.clone(), &cfg, "spec")?;
    let dims_flag = pick_opt(a.dims, &cfg, "dims")?;
    let (spec, bsnr_default, mut entries) = match (preset_name, spec_path) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "--preset and --spec are mutually exclusive",
            ))
        }
        (None, None) => return Err(CliError::usage("need --preset or --spec")),
        (Some(name), None) => {
            let p = parse_preset(&name, &cfg, &a)?;
            let d = dims_flag.unwrap_or_else(|| default_dims(&p));
            (
                p.spec(d.rows, d.cols)?,
                p.default_bsnr_db(),
                preset_entries(&p),
            )
        }
        (None, Some(path)) => {
            let spec = read_spec_file(&path, dims_flag)?;
            let abs = std::fs::canonicalize(&path).unwrap_or(path);
            (spec, 30.0, vec![entry("spec", abs.display())])
        }
    };
    let bsnr = pick(a.bsnr, &cfg, "bsnr", bsnr_default)?;
    let seed = pick(a.seed, &cfg, "seed", 0u64)?;
    let psf_size = pick(a.psf_size, &cfg, "psf_size", 5usize)?;
    let psf_variance = pick(a.psf_variance, &cfg, "psf_variance", 3.0f64)?;
    let out = required(pick_opt(a.out, &cfg, "out")?, "--out")?;

    let psf = gaussian_psf(psf_size, psf_variance)?;
    let dir = OutputDir::create(&out, "simulate")?;
    let ph = simulate(&spec, &psf, bsnr, seed)?;
    dir.matrix("x.gpdm", &ph.x)?;
    dir.labels("z.gpdl", &ph.z)?;
    dir.matrix("y.gpdm", &ph.y)?;
    dir.matrix("psf.gpdm", &ph.psf)?;
    dir.text(PHANTOM_FILE, &spec_file_text(&spec))?;

    entries.extend([
        entry(
            "dims",
            Dims {
                rows: spec.rows,
                cols: spec.cols,
            },
        ),
        entry("bsnr", bsnr),
        entry("seed", seed),
        entry("psf_size", psf_size),
        entry("psf_variance", psf_variance),
        entry("sigma2", format!("{:e}", ph.sigma2)),
    ]);
    dir.text(MANIFEST, &manifest("simulate", entries))?;
    dir.finish()?;
    println!(
        "simulate: {}x{}, {} classes, bsnr {bsnr} dB, noise variance {:.4e} -> {}",
        spec.rows,
        spec.cols,
        spec.classes.len(),
        ph.sigma2,
        out.display()
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ggdpotts::phantoms::Preset;

    #[test]
    fn spec_text_round_trips_every_preset() {
        let presets = [
            Preset::Group1,
            Preset::Group2,
            Preset::Group3,
            Preset::OaSweep {
                sweep: Sweep::Scale,
                ratio: 2.0,
            },
            Preset::Iid {
                shape: 1.5,
                scale: 1.26,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        for p in presets {
            let spec = p.spec(40, 30).unwrap();
            let path = dir.path().join("s.txt");
            std::fs::write(&path, spec_file_text(&spec)).unwrap();
            assert_eq!(read_spec_file(&path, None).unwrap(), spec, "{}", p.name());
        }
    }

    #[test]
    fn region_lines_validate_classes() {
        assert_eq!(
            parse_region("disc 1 2 3 2").unwrap(),
            Region::Disc {
                center: (1.0, 2.0),
                radius: 3.0,
                class: 1
            }
        );
        assert!(parse_region("disc 1 2 3 0").is_err());
        assert!(parse_region("disc 1 2 3").is_err());
        assert!(parse_region("rectangle 0 0 2 2 0").is_err());
        assert!(parse_region("blob 1").is_err());
    }
}
