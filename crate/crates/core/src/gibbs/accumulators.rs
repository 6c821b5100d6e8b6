//! Running posterior statistics and per-iteration traces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{write_atomic, ImageGrid, LabelField};

/// Per-pixel, per-class running sums of retained reflectivity draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorAccumulators {
    rows: usize,
    cols: usize,
    k_classes: usize,
    /// `sum[k * N + n]`: sum of `x_n` over retained iterations with `z_n = k`.
    sum: Vec<f64>,
    /// `count[k * N + n]`: number of retained iterations with `z_n = k`.
    count: Vec<u64>,
    total_sum: Vec<f64>,
    retained: u64,
}

impl PosteriorAccumulators {
    pub fn new(rows: usize, cols: usize, k_classes: usize) -> Self {
        let n = rows * cols;
        Self {
            rows,
            cols,
            k_classes,
            sum: vec![0.0; n * k_classes],
            count: vec![0; n * k_classes],
            total_sum: vec![0.0; n],
            retained: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.retained == 0
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn retained(&self) -> u64 {
        self.retained
    }

    pub fn record(&mut self, x: &ImageGrid, z: &LabelField) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        for (i, (&xv, &k)) in x.as_slice().iter().zip(z.classes()).enumerate() {
            self.sum[k * n + i] += xv;
            self.count[k * n + i] += 1;
            self.total_sum[i] += xv;
        }
        self.retained += 1;
    }

    pub fn class_sum(&self, pixel: usize, k: usize) -> f64 {
        self.sum[k * self.len() + pixel]
    }

    pub fn class_count(&self, pixel: usize, k: usize) -> u64 {
        self.count[k * self.len() + pixel]
    }

    /// Unconditioned posterior mean of `x_n`.
    pub fn mean(&self, pixel: usize) -> f64 {
        self.total_sum[pixel] / self.retained as f64
    }

    /// Reorders class indices so that new class `perm[k]` holds old class `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let mut out = self.clone();
        for (k, &pk) in perm.iter().enumerate() {
            out.sum[pk * n..(pk + 1) * n].copy_from_slice(&self.sum[k * n..(k + 1) * n]);
            out.count[pk * n..(pk + 1) * n].copy_from_slice(&self.count[k * n..(k + 1) * n]);
        }
        out
    }

    /// Adds another chain's statistics.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if (self.rows, self.cols, self.k_classes) != (other.rows, other.cols, other.k_classes) {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        self.sum
            .iter_mut()
            .zip(&other.sum)
            .for_each(|(a, b)| *a += b);
        self.count
            .iter_mut()
            .zip(&other.count)
            .for_each(|(a, b)| *a += b);
        self.total_sum
            .iter_mut()
            .zip(&other.total_sum)
            .for_each(|(a, b)| *a += b);
        self.retained += other.retained;
        Ok(())
    }
}

/// Tally of one Metropolis-type move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptanceCounter {
    pub accepted: u64,
    pub rejected: u64,
    pub skipped: u64,
}

impl AcceptanceCounter {
    pub fn attempts(&self) -> u64 {
        self.accepted + self.rejected
    }

    pub fn rate(&self) -> Option<f64> {
        let a = self.attempts();
        (a > 0).then(|| self.accepted as f64 / a as f64)
    }
}

/// Per-iteration scalar record of one chain, including burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTraces {
    pub k_classes: usize,
    pub n_burnin: usize,
    pub sigma2: Vec<f64>,
    /// `shape[k][t]`
    pub shape: Vec<Vec<f64>>,
    pub scale: Vec<Vec<f64>>,
    pub accept_hmc: Vec<i8>,
    pub accept_rwmh: Vec<Vec<i8>>,
    /// `U(x)` at the end of each iteration.
    pub potential: Vec<f64>,
    pub hmc_eps: Vec<f64>,
    pub rwmh_delta: Vec<Vec<f64>>,
    pub hmc_nonfinite: u64,
}

impl ChainTraces {
    pub fn new(k_classes: usize, n_burnin: usize) -> Self {
        Self {
            k_classes,
            n_burnin,
            sigma2: Vec::new(),
            shape: vec![Vec::new(); k_classes],
            scale: vec![Vec::new(); k_classes],
            accept_hmc: Vec::new(),
            accept_rwmh: vec![Vec::new(); k_classes],
            potential: Vec::new(),
            hmc_eps: Vec::new(),
            rwmh_delta: vec![Vec::new(); k_classes],
            hmc_nonfinite: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    /// Post-burn-in part of a trace.
    pub fn retained<'a>(&self, trace: &'a [f64]) -> &'a [f64] {
        &trace[self.n_burnin.min(trace.len())..]
    }

    pub fn hmc_counter(&self) -> AcceptanceCounter {
        counter(&self.accept_hmc)
    }

    pub fn rwmh_counter(&self, k: usize) -> AcceptanceCounter {
        counter(&self.accept_rwmh[k])
    }

    /// Relabels classes so that new class `perm[k]` holds old class `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (k, &pk) in perm.iter().enumerate() {
            out.shape[pk] = self.shape[k].clone();
            out.scale[pk] = self.scale[k].clone();
            out.accept_rwmh[pk] = self.accept_rwmh[k].clone();
            out.rwmh_delta[pk] = self.rwmh_delta[k].clone();
        }
        out
    }

    pub fn csv_header(&self) -> String {
        let k = self.k_classes;
        let mut h = String::from("iter,sigma2");
        (1..=k).for_each(|i| write!(h, ",xi_{i}").unwrap());
        (1..=k).for_each(|i| write!(h, ",gamma_{i}").unwrap());
        h.push_str(",accept_hmc");
        (1..=k).for_each(|i| write!(h, ",accept_rwmh_{i}").unwrap());
        h.push_str(",potential,hmc_eps");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.csv_header();
        s.push('\n');
        for t in 0..self.len() {
            write!(s, "{},{:.16e}", t + 1, self.sigma2[t]).unwrap();
            self.shape
                .iter()
                .for_each(|v| write!(s, ",{:.16e}", v[t]).unwrap());
            self.scale
                .iter()
                .for_each(|v| write!(s, ",{:.16e}", v[t]).unwrap());
            write!(s, ",{}", self.accept_hmc[t]).unwrap();
            self.accept_rwmh
                .iter()
                .for_each(|v| write!(s, ",{}", v[t]).unwrap());
            writeln!(s, ",{:.16e},{:.16e}", self.potential[t], self.hmc_eps[t]).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

fn counter(codes: &[i8]) -> AcceptanceCounter {
    let mut c = AcceptanceCounter::default();
    for &v in codes {
        match v {
            1 => c.accepted += 1,
            0 => c.rejected += 1,
            _ => c.skipped += 1,
        }
    }
    c
}
