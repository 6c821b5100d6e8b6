//! Potts Markov random field prior on the label field.
//!
//! First-order (4-nearest) neighbourhoods, truncated at the image border:
//! labels do not wrap around even though the blur does.

use crate::error::{Error, Result};
use crate::grid::LabelField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PottsConfig {
    beta: f64,
    k_classes: usize,
}

impl PottsConfig {
    pub fn new(beta: f64, k_classes: usize) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "Potts granularity {beta} must be >= 0"
            )));
        }
        if k_classes == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        Ok(Self { beta, k_classes })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }
}

/// Calls `f` for each in-bounds N, S, W, E neighbour of pixel `n`.
#[inline]
pub(crate) fn for_each_neighbor(n: usize, rows: usize, cols: usize, mut f: impl FnMut(usize)) {
    let (r, c) = (n / cols, n % cols);
    if r > 0 {
        f(n - cols);
    }
    if r + 1 < rows {
        f(n + cols);
    }
    if c > 0 {
        f(n - 1);
    }
    if c + 1 < cols {
        f(n + 1);
    }
}

/// In-bounds first-order neighbours of pixel `n`, in N, S, W, E order.
pub fn neighbors(n: usize, dims: (usize, usize)) -> Result<Vec<usize>> {
    let (rows, cols) = dims;
    if n >= rows * cols {
        return Err(Error::invalid(format!(
            "pixel {n} outside {rows}x{cols} grid"
        )));
    }
    let mut out = Vec::with_capacity(4);
    for_each_neighbor(n, rows, cols, |m| out.push(m));
    Ok(out)
}

/// `β · Σ_{n' ∈ V(n)} δ(k − z_{n'})` for 0-based class `k`.
pub fn local_log_weight(n: usize, k: usize, z: &LabelField, cfg: &PottsConfig) -> f64 {
    let mut agree = 0usize;
    for_each_neighbor(n, z.rows(), z.cols(), |m| {
        if z.class(m) == k {
            agree += 1;
        }
    });
    cfg.beta * agree as f64
}

/// `Σ_n Σ_{n' ∈ V(n)} β δ(z_n − z_{n'})`, summed over ordered neighbour
/// pairs so every agreeing edge contributes twice.
///
/// The label sweep draws each `z_n` with weights `exp(local_log_weight)`,
/// which are the full conditionals of `exp(potts_energy / 2)`.
pub fn potts_energy(z: &LabelField, cfg: &PottsConfig) -> f64 {
    let (rows, cols) = z.dims();
    let mut agree = 0usize;
    for n in 0..z.len() {
        let k = z.class(n);
        for_each_neighbor(n, rows, cols, |m| {
            if z.class(m) == k {
                agree += 1;
            }
        });
    }
    cfg.beta * agree as f64
}
