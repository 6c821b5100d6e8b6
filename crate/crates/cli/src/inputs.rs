//! Shared plumbing: config loading, manifests, grid inputs and small
//! value types parsed from flags and config files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ggdpotts::grid::{ImageGrid, LabelField};

use crate::config::{render, Config};
use crate::error::CliError;

/// Keys every manifest carries; informational on re-read.
pub const COMMON_KEYS: &[&str] = &["command", "version"];

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Loads `path` (if any), rejects unknown keys and manifests written by a
/// different subcommand.
pub fn load_config(path: Option<&Path>, command: &str, known: &[&str]) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let cfg = Config::load(path)?;
    if let Some(c) = cfg.get("command") {
        if c != command {
            return Err(CliError::usage(format!(
                "{} was written by `{c}`, not `{command}`",
                path.display()
            )));
        }
    }
    let all: Vec<&str> = COMMON_KEYS.iter().chain(known).copied().collect();
    cfg.check_keys(&all)?;
    Ok(cfg)
}

/// Manifest text: `command` and `version` first, then `entries`.
pub fn manifest(command: &str, entries: Vec<(String, String)>) -> String {
    let mut all = vec![
        ("command".to_string(), command.to_string()),
        ("version".to_string(), VERSION.to_string()),
    ];
    all.extend(entries);
    render(&[format!("ggdpotts {VERSION} {command}; re-run with `ggdpotts {command} --config <this file> --out <dir>`")], &all)
}

pub fn entry(key: &str, value: impl fmt::Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// Attaches a path to a library error, keeping its exit code.
pub fn with_path(path: &Path, e: ggdpotts::Error) -> CliError {
    let mut err = CliError::from(e);
    err.message = format!("{}: {}", path.display(), err.message);
    err
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

pub fn read_grid(path: &Path) -> Result<ImageGrid, CliError> {
    ImageGrid::from_bytes(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

pub fn read_label_field(path: &Path) -> Result<LabelField, CliError> {
    LabelField::from_bytes(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

/// 64-bit FNV-1a; ties a manifest to the exact bytes it was run on.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// An input grid plus where it came from.
pub struct GridInput {
    pub path: PathBuf,
    pub grid: ImageGrid,
    pub digest: u64,
}

impl GridInput {
    /// Reads `path`; with `expected` set, refuses bytes whose digest differs.
    pub fn load(path: &Path, expected: Option<&str>) -> Result<Self, CliError> {
        let bytes = read_bytes(path)?;
        let digest = fnv1a64(&bytes);
        if let Some(recorded) = expected {
            if recorded != format!("{digest:016x}") {
                return Err(CliError::usage(format!(
                    "{} changed since the config recorded it",
                    path.display()
                )));
            }
        }
        let grid = ImageGrid::from_bytes(&bytes).map_err(|e| with_path(path, e))?;
        let path = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        Ok(Self { path, grid, digest })
    }

    pub fn manifest_entries(&self, key: &str) -> [(String, String); 2] {
        [
            entry(key, self.path.display()),
            entry(&format!("{key}_fnv1a64"), format!("{:016x}", self.digest)),
        ]
    }
}

/// Observation and PSF from `--data <simulate dir>` or `--obs` and `--psf`.
/// Flags beat the config; recorded digests apply only to paths taken from it.
pub fn observation_and_psf(
    data: Option<PathBuf>,
    obs: Option<PathBuf>,
    psf: Option<PathBuf>,
    cfg: &Config,
) -> Result<(GridInput, GridInput), CliError> {
    if let Some(d) = data {
        if obs.is_some() || psf.is_some() {
            return Err(CliError::usage(
                "--data cannot be combined with --obs or --psf",
            ));
        }
        return Ok((
            GridInput::load(&d.join("y.gpdm"), None)?,
            GridInput::load(&d.join("psf.gpdm"), None)?,
        ));
    }
    if obs.is_none() && psf.is_none() {
        if let Some(d) = cfg.parsed::<PathBuf>("data")? {
            return Ok((
                GridInput::load(&d.join("y.gpdm"), None)?,
                GridInput::load(&d.join("psf.gpdm"), None)?,
            ));
        }
    }
    let load = |flag: Option<PathBuf>, key: &str| -> Result<GridInput, CliError> {
        match flag {
            Some(p) => GridInput::load(&p, None),
            None => {
                let p = required(cfg.parsed::<PathBuf>(key)?, &format!("--{key} (or --data)"))?;
                GridInput::load(&p, cfg.get(&format!("{key}_fnv1a64")))
            }
        }
    };
    Ok((load(obs, "obs")?, load(psf, "psf")?))
}

pub fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::usage(format!("missing required {flag}")))
}

/// `ROWSxCOLS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
        let rows: usize = r
            .trim()
            .parse()
            .map_err(|_| format!("bad row count {r:?}"))?;
        let cols: usize = c
            .trim()
            .parse()
            .map_err(|_| format!("bad column count {c:?}"))?;
        if rows == 0 || cols == 0 {
            return Err("dimensions must be positive".into());
        }
        Ok(Self { rows, cols })
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// `ROW0,COL0,HEIGHT,WIDTH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionArg {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl FromStr for RegionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("expected ROW0,COL0,HEIGHT,WIDTH, got {s:?}"))?;
        match v[..] {
            [row0, col0, height, width] => Ok(Self {
                row0,
                col0,
                height,
                width,
            }),
            _ => Err(format!("expected four comma-separated integers, got {s:?}")),
        }
    }
}

impl fmt::Display for RegionArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.row0, self.col0, self.height, self.width
        )
    }
}
