//! Regularized least-squares references: Tikhonov (closed form) and
//! ℓ1 by proximal gradient.

use std::fmt::Write as _;

use rustfft::num_complex::Complex64;

use crate::convolution::CyclicBlurOperator;
use crate::distributions::{standard_normal, RngStream};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "regularization weight {lambda} must be > 0"
        )));
    }
    Ok(())
}

/// `argmin ‖y − Hx‖² + λ‖x‖²`, i.e. `(HᵀH + λI)⁻¹Hᵀy`, solved per frequency.
pub fn l2_deconvolve(y: &ImageGrid, op: &CyclicBlurOperator, lambda: f64) -> Result<ImageGrid> {
    check_lambda(lambda)?;
    op.filter(y, |h| h.conj() / Complex64::new(h.norm_sqr() + lambda, 0.0))
}

/// `0.1 ‖Hᵀy‖_∞`.
pub fn auto_lambda(y: &ImageGrid, op: &CyclicBlurOperator) -> Result<f64> {
    let g = op.adjoint(y)?;
    let m = g.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return Err(Error::degenerate("Hᵀy is identically zero"));
    }
    Ok(0.1 * m)
}

/// Power-iteration estimate of `‖H‖² = λ_max(HᵀH)` from a fixed seeded start.
pub fn operator_norm_sq(op: &CyclicBlurOperator, iterations: usize) -> Result<f64> {
    let (rows, cols) = op.dims();
    let mut rng = RngStream::new(0x5eed, 0);
    let mut v = ImageGrid::from_fn(rows, cols, |_, _| standard_normal(&mut rng))?;
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = v.norm_sq().sqrt();
        if norm == 0.0 {
            return Err(Error::degenerate("power iteration collapsed to zero"));
        }
        let u = v.map(|a| a / norm);
        v = op.normal(&u)?;
        est = u.dot(&v);
    }
    Ok(est)
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Options {
    pub max_iter: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    /// Nesterov-accelerated iterations.
    pub accelerated: bool,
    pub power_iterations: usize,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-10,
            accelerated: false,
            power_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Result {
    pub x: ImageGrid,
    /// Objective before the first iteration and after each iteration.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl L1Result {
    pub fn objective_csv(&self) -> String {
        let mut s = String::from("iter,objective\n");
        for (i, v) in self.objective.iter().enumerate() {
            writeln!(s, "{i},{v:.16e}").unwrap();
        }
        s
    }
}

/// `½‖y − Hx‖² + λ‖x‖₁`.
pub fn l1_objective(
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    x: &ImageGrid,
    lambda: f64,
) -> Result<f64> {
    let r = op.forward(x)?.dist_sq(y);
    Ok(0.5 * r + lambda * x.as_slice().iter().map(|v| v.abs()).sum::<f64>())
}

/// Minimizes `½‖y − Hx‖² + λ‖x‖₁` by iterative shrinkage-thresholding
/// with step `1/‖H‖²`, starting from zero.
///
/// Plain iterations must not increase the objective; an increase beyond
/// rounding is reported as divergence.
pub fn l1_deconvolve(
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    lambda: f64,
    opts: &L1Options,
) -> Result<L1Result> {
    check_lambda(lambda)?;
    let lip = operator_norm_sq(op, opts.power_iterations)?;
    // guard the estimate from below so the step stays inside the
    // monotone range
    let step = 1.0 / (1.01 * lip);
    let (rows, cols) = y.dims();
    let mut x = ImageGrid::zeros(rows, cols)?;
    let mut w = x.clone();
    let mut t = 1.0f64;
    let mut f = l1_objective(y, op, &x, lambda)?;
    let mut objective = vec![f];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let base = if opts.accelerated { &w } else { &x };
        let g = op.adjoint(&op.forward(base)?.map_pair(y, |a, b| a - b))?;
        let next = base.map_pair(&g, |b, gi| soft_threshold(b - step * gi, step * lambda));
        let f_next = l1_objective(y, op, &next, lambda)?;
        if !f_next.is_finite() {
            return Err(Error::numeric("ℓ1 objective is not finite"));
        }
        if !opts.accelerated && f_next > f * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::numeric(format!(
                "ℓ1 objective increased from {f} to {f_next} after {} iterations",
                objective.len() - 1
            )));
        }
        if opts.accelerated {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            w = next.map_pair(&x, |a, b| a + mom * (a - b));
            t = t_next;
        }
        x = next;
        objective.push(f_next);
        let decrease = (f - f_next) / f.abs().max(f64::MIN_POSITIVE);
        f = f_next;
        if decrease.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(L1Result {
        x,
        objective,
        converged,
    })
}

/// Largest violation of the ℓ1 optimality conditions, relative to `λ`:
/// `|g_i| ≤ λ` where `x_i = 0` and `g_i = −λ sign(x_i)` elsewhere, with
/// `g = Hᵀ(Hx − y)`.
pub fn l1_optimality_violation(
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    x: &ImageGrid,
    lambda: f64,
) -> Result<f64> {
    let g = op.adjoint(&op.forward(x)?.map_pair(y, |a, b| a - b))?;
    let mut worst = 0.0f64;
    for (&xi, &gi) in x.as_slice().iter().zip(g.as_slice()) {
        let v = if xi == 0.0 {
            (gi.abs() - lambda).max(0.0)
        } else {
            (gi + lambda * xi.signum()).abs()
        };
        worst = worst.max(v / lambda);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::gaussian_psf;

    fn data(n: usize, seed: u64) -> ImageGrid {
        let mut rng = RngStream::new(seed, 0);
        ImageGrid::from_fn(n, n, |_, _| standard_normal(&mut rng)).unwrap()
    }

    #[test]
    fn l2_delta_psf_limit() {
        let op = CyclicBlurOperator::new(&gaussian_psf(1, 1.0).unwrap(), (6, 6)).unwrap();
        let y = data(6, 1);
        let x = l2_deconvolve(&y, &op, 1e-12).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(l2_deconvolve(&y, &op, 0.0).is_err());
        assert!(l2_deconvolve(&y, &op, -1.0).is_err());
    }

    #[test]
    fn l2_normal_equations() {
        let op = CyclicBlurOperator::new(&gaussian_psf(5, 3.0).unwrap(), (32, 32)).unwrap();
        let y = data(32, 2);
        for lambda in [0.01, 0.1, 1.0] {
            let x = l2_deconvolve(&y, &op, lambda).unwrap();
            let lhs = op.normal(&x).unwrap().map_pair(&x, |a, b| a + lambda * b);
            let rhs = op.adjoint(&y).unwrap();
            let rel = (lhs.dist_sq(&rhs) / rhs.norm_sq()).sqrt();
            assert!(rel <= 1e-10, "λ={lambda}: {rel}");
        }
    }

    #[test]
    fn power_iteration_matches_spectrum() {
        let op = CyclicBlurOperator::new(&gaussian_psf(3, 0.8).unwrap(), (16, 16)).unwrap();
        let est = operator_norm_sq(&op, 200).unwrap();
        let exact = op.max_gain().powi(2);
        assert!((est - exact).abs() < 1e-6 * exact, "{est} vs {exact}");
    }

    #[test]
    fn identity_operator_soft_thresholds() {
        let op = CyclicBlurOperator::new(&gaussian_psf(1, 1.0).unwrap(), (5, 5)).unwrap();
        let y = data(5, 3);
        // the objective gap is quadratic in the iterate error
        let opts = L1Options {
            tol: 1e-20,
            max_iter: 200,
            ..L1Options::default()
        };
        let r = l1_deconvolve(&y, &op, 0.4, &opts).unwrap();
        for (a, b) in r.x.as_slice().iter().zip(y.as_slice()) {
            assert!(
                (a - soft_threshold(*b, 0.4)).abs() < 1e-9,
                "{a} vs {}",
                soft_threshold(*b, 0.4)
            );
        }
        assert_eq!(soft_threshold(1.0, 0.3), 0.7);
        assert_eq!(soft_threshold(-1.0, 0.3), -0.7);
        assert_eq!(soft_threshold(0.2, 0.3), 0.0);
    }

    #[test]
    fn ista_is_monotone_and_certified() {
        let op = CyclicBlurOperator::new(&gaussian_psf(3, 0.5).unwrap(), (16, 16)).unwrap();
        let y = data(16, 4);
        let lambda = 0.3;
        let opts = L1Options {
            max_iter: 20_000,
            tol: 1e-15,
            ..L1Options::default()
        };
        let r = l1_deconvolve(&y, &op, lambda, &opts).unwrap();
        assert!(r.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(r.converged);
        let v = l1_optimality_violation(&y, &op, &r.x, lambda).unwrap();
        assert!(v <= 1e-6, "violation {v}");
        assert!(r.x.as_slice().contains(&0.0));
        assert!(r.x.as_slice().iter().any(|&a| a != 0.0));
        assert!(r.objective_csv().starts_with("iter,objective\n0,"));
    }

    #[test]
    fn accelerated_reaches_same_minimum() {
        let op = CyclicBlurOperator::new(&gaussian_psf(3, 0.5).unwrap(), (16, 16)).unwrap();
        let y = data(16, 5);
        let plain = l1_deconvolve(
            &y,
            &op,
            0.3,
            &L1Options {
                max_iter: 20_000,
                tol: 1e-15,
                ..L1Options::default()
            },
        )
        .unwrap();
        let fast = l1_deconvolve(
            &y,
            &op,
            0.3,
            &L1Options {
                max_iter: 20_000,
                tol: 1e-15,
                accelerated: true,
                ..L1Options::default()
            },
        )
        .unwrap();
        let (a, b) = (
            plain.objective.last().unwrap(),
            fast.objective.last().unwrap(),
        );
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn auto_lambda_rule() {
        let op = CyclicBlurOperator::new(&gaussian_psf(3, 1.0).unwrap(), (8, 8)).unwrap();
        let y = data(8, 6);
        let g = op.adjoint(&y).unwrap();
        let m = g.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(auto_lambda(&y, &op).unwrap(), 0.1 * m);
        assert!(auto_lambda(&ImageGrid::zeros(8, 8).unwrap(), &op).is_err());
    }
}
