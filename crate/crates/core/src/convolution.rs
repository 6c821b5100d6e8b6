//! Cyclic (BCCB) blur operator applied through a real 2D FFT.
//!
//! Spectra use the half-plane layout produced by a real-to-complex transform
//! along rows followed by a complex transform along columns, stored
//! column-major: the coefficient for row-frequency `u` and column-frequency
//! `v` (with `v < cols/2 + 1`) sits at index `v * rows + u`.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Planned real 2D FFT for one grid size.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

/// Per-caller scratch buffers for [`Fft2`].
#[derive(Debug, Clone)]
pub struct FftWorkspace {
    row_real: Vec<f64>,
    row_spec: Vec<Complex64>,
    real_scratch: Vec<Complex64>,
    col_scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        Self {
            rows,
            cols,
            half: cols / 2 + 1,
            r2c: real_planner.plan_fft_forward(cols),
            c2r: real_planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn spectrum_len(&self) -> usize {
        self.half * self.rows
    }

    pub fn workspace(&self) -> FftWorkspace {
        let real_len = self.r2c.get_scratch_len().max(self.c2r.get_scratch_len());
        let col_len = self
            .col_fwd
            .get_inplace_scratch_len()
            .max(self.col_inv.get_inplace_scratch_len());
        FftWorkspace {
            row_real: vec![0.0; self.cols],
            row_spec: vec![Complex64::default(); self.half],
            real_scratch: vec![Complex64::default(); real_len],
            col_scratch: vec![Complex64::default(); col_len],
        }
    }

    /// Multiplicity of each half-plane column in the full spectrum: 1 for
    /// self-conjugate columns (DC and, for even widths, Nyquist), 2 otherwise.
    pub fn column_weight(&self, v: usize) -> f64 {
        if v == 0 || (self.cols.is_multiple_of(2) && v == self.half - 1) {
            1.0
        } else {
            2.0
        }
    }

    /// Unnormalized forward transform of a row-major real image.
    pub fn forward(&self, input: &[f64], spec: &mut [Complex64], ws: &mut FftWorkspace) {
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        debug_assert_eq!(input.len(), rows * cols);
        debug_assert_eq!(spec.len(), half * rows);
        for r in 0..rows {
            ws.row_real
                .copy_from_slice(&input[r * cols..(r + 1) * cols]);
            self.r2c
                .process_with_scratch(&mut ws.row_real, &mut ws.row_spec, &mut ws.real_scratch)
                .expect("row transform buffers are sized by the plan");
            for (v, &c) in ws.row_spec.iter().enumerate() {
                spec[v * rows + r] = c;
            }
        }
        for col in spec.chunks_exact_mut(rows) {
            self.col_fwd.process_with_scratch(col, &mut ws.col_scratch);
        }
    }

    /// Inverse transform, normalized by `1/(rows·cols)`. Consumes `spec`.
    pub fn inverse(&self, spec: &mut [Complex64], output: &mut [f64], ws: &mut FftWorkspace) {
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        debug_assert_eq!(output.len(), rows * cols);
        for col in spec.chunks_exact_mut(rows) {
            self.col_inv.process_with_scratch(col, &mut ws.col_scratch);
        }
        let scale = 1.0 / (rows * cols) as f64;
        for r in 0..rows {
            for v in 0..half {
                ws.row_spec[v] = spec[v * rows + r];
            }
            // Hermitian input: imaginary parts of the self-conjugate bins are
            // round-off only (or non-finite, which callers detect downstream)
            ws.row_spec[0].im = 0.0;
            if cols.is_multiple_of(2) {
                ws.row_spec[half - 1].im = 0.0;
            }
            let out = &mut output[r * cols..(r + 1) * cols];
            self.c2r
                .process_with_scratch(&mut ws.row_spec, out, &mut ws.real_scratch)
                .expect("row transform buffers are sized by the plan");
            for v in out.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// The blur matrix `H` of `y = Hx + n` for a shift-invariant PSF under
/// cyclic boundary conditions.
#[derive(Debug, Clone)]
pub struct CyclicBlurOperator {
    psf: ImageGrid,
    otf: Vec<Complex64>,
    fft: Fft2,
}

impl CyclicBlurOperator {
    /// Normalizes `psf` to unit sum, zero-pads it to `grid_dims` with its
    /// center sample `((h−1)/2, (w−1)/2)` moved to the origin, and
    /// precomputes the transfer function.
    pub fn new(psf: &ImageGrid, grid_dims: (usize, usize)) -> Result<Self> {
        let (rows, cols) = grid_dims;
        if psf.rows() > rows || psf.cols() > cols {
            return Err(Error::invalid(format!(
                "PSF {}x{} larger than grid {rows}x{cols}",
                psf.rows(),
                psf.cols()
            )));
        }
        let total = psf.sum();
        if total.abs() < f64::MIN_POSITIVE {
            return Err(Error::degenerate("PSF sums to zero"));
        }
        let psf = psf.map(|v| v / total);
        let (cr, cc) = ((psf.rows() - 1) / 2, (psf.cols() - 1) / 2);
        let mut padded = vec![0.0; rows * cols];
        for a in 0..psf.rows() {
            for b in 0..psf.cols() {
                let r = (a + rows - cr) % rows;
                let c = (b + cols - cc) % cols;
                padded[r * cols + c] += psf.get(a, b);
            }
        }
        let fft = Fft2::new(rows, cols);
        let mut otf = vec![Complex64::default(); fft.spectrum_len()];
        let mut ws = fft.workspace();
        fft.forward(&padded, &mut otf, &mut ws);
        Ok(Self { psf, otf, fft })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.fft.rows, self.fft.cols)
    }

    pub fn len(&self) -> usize {
        self.fft.rows * self.fft.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The unit-sum kernel the operator was built from.
    pub fn psf(&self) -> &ImageGrid {
        &self.psf
    }

    pub fn otf(&self) -> &[Complex64] {
        &self.otf
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn workspace(&self) -> FftWorkspace {
        self.fft.workspace()
    }

    /// `max |Ĥ(f)|`, the operator norm of `H`.
    pub fn max_gain(&self) -> f64 {
        self.otf.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check(&self, g: &ImageGrid) -> Result<()> {
        if g.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: g.dims(),
            });
        }
        Ok(())
    }

    fn apply(&self, g: &ImageGrid, filter: impl Fn(Complex64) -> Complex64) -> Result<ImageGrid> {
        self.check(g)?;
        let mut ws = self.workspace();
        let mut spec = vec![Complex64::default(); self.fft.spectrum_len()];
        self.fft.forward(g.as_slice(), &mut spec, &mut ws);
        for (s, &h) in spec.iter_mut().zip(&self.otf) {
            *s *= filter(h);
        }
        let mut out = vec![0.0; self.len()];
        self.fft.inverse(&mut spec, &mut out, &mut ws);
        Ok(ImageGrid::from_raw(g.rows(), g.cols(), out))
    }

    /// `Hx`.
    pub fn forward(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.apply(x, |h| h)
    }

    /// `Hᵀy`.
    pub fn adjoint(&self, y: &ImageGrid) -> Result<ImageGrid> {
        self.apply(y, |h| h.conj())
    }

    /// `HᵀHx`.
    pub fn normal(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.apply(x, |h| Complex64::new(h.norm_sqr(), 0.0))
    }

    /// Applies an arbitrary frequency response `g(Ĥ)` to `x`.
    pub fn filter(&self, x: &ImageGrid, g: impl Fn(Complex64) -> Complex64) -> Result<ImageGrid> {
        self.apply(x, g)
    }
}

/// Isotropic Gaussian kernel on a `size × size` lattice with the given
/// variance, normalized to unit sum.
pub fn gaussian_psf(size: usize, variance: f64) -> Result<ImageGrid> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("PSF size {size} must be odd")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!(
            "PSF variance {variance} must be positive"
        )));
    }
    let c = (size / 2) as f64;
    let g = ImageGrid::from_fn(size, size, |r, col| {
        let dr = r as f64 - c;
        let dc = col as f64 - c;
        (-(dr * dr + dc * dc) / (2.0 * variance)).exp()
    })?;
    let total = g.sum();
    Ok(g.map(|v| v / total))
}
