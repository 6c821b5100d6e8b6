//! Reconstruction and segmentation quality measures.

use std::fmt::Write as _;

use rustfft::num_complex::Complex64;

use crate::convolution::Fft2;
use crate::error::{Error, Result};
use crate::grid::{extract_region, ImageGrid, LabelField, RegionMask};

/// Largest class count for exhaustive permutation alignment.
pub const MAX_ALIGN_CLASSES: usize = 6;

/// SSIM window side.
pub const SSIM_WINDOW: usize = 8;

/// Default normalized-autocorrelation threshold for the resolution gain.
pub const RG_THRESHOLD: f64 = 0.5;

/// `10 log10(‖x − y‖² / ‖x − x̂‖²)`; `+∞` when `x̂ = x`.
pub fn isnr(x: &ImageGrid, y: &ImageGrid, xhat: &ImageGrid) -> Result<f64> {
    x.ensure_same_dims(y)?;
    x.ensure_same_dims(xhat)?;
    let num = x.dist_sq(y);
    let den = x.dist_sq(xhat);
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (num / den).log10())
}

/// `‖x − x̂‖ / ‖x‖`.
pub fn nrmse(x: &ImageGrid, xhat: &ImageGrid) -> Result<f64> {
    x.ensure_same_dims(xhat)?;
    let norm = x.norm_sq();
    if norm == 0.0 {
        return Err(Error::degenerate("reference image has zero norm"));
    }
    Ok((x.dist_sq(xhat) / norm).sqrt())
}

/// `10 log10(peak² / MSE)` with the peak taken as the largest value in
/// either image; `+∞` when the images are equal.
pub fn psnr(x: &ImageGrid, xhat: &ImageGrid) -> Result<f64> {
    x.ensure_same_dims(xhat)?;
    let mse = x.dist_sq(xhat) / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = x.max().max(xhat.max());
    Ok(10.0 * (peak * peak / mse).log10())
}

/// SSIM of two equally sized windows given by pixel iterators.
fn ssim_window(a: &[f64], b: &[f64], c1: f64, c2: f64) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (&p, &q) in a.iter().zip(b) {
        va += (p - ma) * (p - ma);
        vb += (q - mb) * (q - mb);
        cov += (p - ma) * (q - mb);
    }
    let (va, vb, cov) = (va / n, vb / n, cov / n);
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

/// Mean SSIM over non-overlapping 8×8 windows; partial windows at the right
/// and bottom edges are ignored. `C1 = (0.01 L)²`, `C2 = (0.03 L)²` with `L`
/// the dynamic range of `x`.
pub fn mssim(x: &ImageGrid, xhat: &ImageGrid) -> Result<f64> {
    x.ensure_same_dims(xhat)?;
    let (rows, cols) = x.dims();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let min = x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let range = x.max() - min;
    if range <= 0.0 {
        return Err(Error::degenerate("reference image has zero dynamic range"));
    }
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut a = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    let mut b = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    let (mut total, mut count) = (0.0, 0usize);
    for r0 in (0..=rows - SSIM_WINDOW).step_by(SSIM_WINDOW) {
        for c0 in (0..=cols - SSIM_WINDOW).step_by(SSIM_WINDOW) {
            a.clear();
            b.clear();
            for r in r0..r0 + SSIM_WINDOW {
                for c in c0..c0 + SSIM_WINDOW {
                    a.push(x.get(r, c));
                    b.push(xhat.get(r, c));
                }
            }
            total += ssim_window(&a, &b, c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Permutation `perm[old] = new` of the estimate's classes maximizing
/// agreement with the reference, and the number of agreeing pixels.
/// Ties keep the lexicographically first permutation.
pub fn best_permutation(
    reference: &LabelField,
    estimate: &LabelField,
) -> Result<(Vec<usize>, usize)> {
    if reference.dims() != estimate.dims() {
        return Err(Error::DimensionMismatch {
            expected: reference.dims(),
            found: estimate.dims(),
        });
    }
    let k = reference.k_classes();
    if estimate.k_classes() != k {
        return Err(Error::invalid(format!(
            "class counts differ: {k} vs {}",
            estimate.k_classes()
        )));
    }
    if k > MAX_ALIGN_CLASSES {
        return Err(Error::invalid(format!(
            "permutation alignment supports at most {MAX_ALIGN_CLASSES} classes"
        )));
    }
    // confusion[old * k + ref]
    let mut confusion = vec![0usize; k * k];
    for (&r, &e) in reference.classes().iter().zip(estimate.classes()) {
        confusion[e * k + r] += 1;
    }
    let mut best = (Vec::new(), 0usize);
    for p in permutations(k) {
        let m: usize = (0..k).map(|old| confusion[old * k + p[old]]).sum();
        if best.0.is_empty() || m > best.1 {
            best = (p, m);
        }
    }
    Ok(best)
}

/// Fraction of pixels with equal labels after the best class permutation.
pub fn overall_accuracy(z_true: &LabelField, z_hat: &LabelField) -> Result<f64> {
    let (_, m) = best_permutation(z_true, z_hat)?;
    Ok(m as f64 / z_true.len() as f64)
}

/// `|μ₁ − μ₂| / √(σ₁² + σ₂²)` over two disjoint rectangles.
pub fn cnr(grid: &ImageGrid, r1: &RegionMask, r2: &RegionMask) -> Result<f64> {
    if r1.overlaps(r2) {
        return Err(Error::invalid("CNR regions overlap"));
    }
    let (m1, s1) = extract_region(grid, r1)?;
    let (m2, s2) = extract_region(grid, r2)?;
    let d = s1 * s1 + s2 * s2;
    if d == 0.0 {
        return Err(Error::degenerate("both CNR regions are constant"));
    }
    Ok((m1 - m2).abs() / d.sqrt())
}

/// Number of lags whose mean-removed, peak-normalized cyclic
/// autocorrelation exceeds `threshold`.
pub fn autocorrelation_area(g: &ImageGrid, threshold: f64) -> Result<usize> {
    let (rows, cols) = g.dims();
    let mean = g.mean();
    let centred: Vec<f64> = g.as_slice().iter().map(|v| v - mean).collect();
    let fft = Fft2::new(rows, cols);
    let mut ws = fft.workspace();
    let mut spec = vec![Complex64::default(); fft.spectrum_len()];
    fft.forward(&centred, &mut spec, &mut ws);
    for s in spec.iter_mut() {
        *s = Complex64::new(s.norm_sqr(), 0.0);
    }
    let mut acf = vec![0.0; rows * cols];
    fft.inverse(&mut spec, &mut acf, &mut ws);
    let peak = acf[0];
    if !(peak > 0.0) {
        return Err(Error::degenerate("image has no energy around its mean"));
    }
    Ok(acf.iter().filter(|&&v| v / peak > threshold).count())
}

/// `A(y) / A(x̂)` with `A` the autocorrelation area above `threshold`.
pub fn resolution_gain(y: &ImageGrid, xhat: &ImageGrid, threshold: f64) -> Result<f64> {
    y.ensure_same_dims(xhat)?;
    Ok(autocorrelation_area(y, threshold)? as f64 / autocorrelation_area(xhat, threshold)? as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub isnr: Option<f64>,
    pub nrmse: Option<f64>,
    pub psnr: Option<f64>,
    pub mssim: Option<f64>,
    pub oa: Option<f64>,
    pub cnr: Option<f64>,
    pub rg: Option<f64>,
}

impl MetricsReport {
    fn rows(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("isnr_db", self.isnr),
            ("nrmse", self.nrmse),
            ("psnr_db", self.psnr),
            ("mssim", self.mssim),
            ("oa", self.oa),
            ("cnr", self.cnr),
            ("rg", self.rg),
        ]
    }

    /// `metric,value` lines for the metrics that were computed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (name, v) in self.rows() {
            if let Some(v) = v {
                writeln!(s, "{name},{v:.10e}").unwrap();
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, v) in self.rows() {
            if let Some(v) = v {
                writeln!(s, "{name:<8} {v:.4}").unwrap();
            }
        }
        s
    }
}
