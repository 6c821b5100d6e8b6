//! Potential energy, gradient and leapfrog integration for the reflectivity
//! move.
//!
//! `U(x) = ‖y − Hx‖² / (2σ²) + Σ_n (x_n² + ε)^{ξ_{z_n}/2} / γ_{z_n}`, where the
//! smoothed magnitude keeps `U` differentiable for shapes `ξ ≤ 1`.

use rustfft::num_complex::Complex64;

use crate::convolution::{CyclicBlurOperator, FftWorkspace};
use crate::distributions::{standard_normal, GgdClassParams, RngStream};
use crate::grid::{ImageGrid, LabelField};

/// Spectrum of the observation, computed once per chain.
#[derive(Debug, Clone)]
pub struct ObservationSpectrum {
    spec: Vec<Complex64>,
}

impl ObservationSpectrum {
    pub fn new(op: &CyclicBlurOperator, y: &ImageGrid) -> Self {
        let mut spec = vec![Complex64::default(); op.fft().spectrum_len()];
        let mut ws = op.workspace();
        op.fft().forward(y.as_slice(), &mut spec, &mut ws);
        Self { spec }
    }
}

/// The conditional target `p(x | y, σ², ξ, γ, z)` in energy form.
pub struct ReflectivityTarget<'a> {
    op: &'a CyclicBlurOperator,
    y_spec: &'a ObservationSpectrum,
    inv_two_sigma2: f64,
    smoothing: f64,
    shape: Vec<f64>,
    inv_scale: Vec<f64>,
    spec: Vec<Complex64>,
    grad_lik: Vec<f64>,
    ws: FftWorkspace,
}

impl<'a> ReflectivityTarget<'a> {
    pub fn new(
        op: &'a CyclicBlurOperator,
        y_spec: &'a ObservationSpectrum,
        sigma2: f64,
        classes: &[GgdClassParams],
        z: &LabelField,
        smoothing: f64,
    ) -> Self {
        let shape = z.classes().iter().map(|&k| classes[k].shape()).collect();
        let inv_scale = z
            .classes()
            .iter()
            .map(|&k| 1.0 / classes[k].scale())
            .collect();
        Self {
            op,
            y_spec,
            inv_two_sigma2: 0.5 / sigma2,
            smoothing,
            shape,
            inv_scale,
            spec: vec![Complex64::default(); op.fft().spectrum_len()],
            grad_lik: vec![0.0; op.len()],
            ws: op.workspace(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Squared data misfit `‖y − Hx‖²` from the current spectrum buffer
    /// (Parseval over the half plane), leaving `R = ĤX − Ŷ` in the buffer.
    fn residual_energy_in_spectrum(&mut self, x: &[f64]) -> f64 {
        let fft = self.op.fft();
        fft.forward(x, &mut self.spec, &mut self.ws);
        let rows = self.op.dims().0;
        let otf = self.op.otf();
        let yspec = &self.y_spec.spec;
        let mut acc = 0.0;
        for (v, col) in self.spec.chunks_exact_mut(rows).enumerate() {
            let base = v * rows;
            let mut col_acc = 0.0;
            for (u, s) in col.iter_mut().enumerate() {
                *s = otf[base + u] * *s - yspec[base + u];
                col_acc += s.norm_sqr();
            }
            acc += fft.column_weight(v) * col_acc;
        }
        acc / self.op.len() as f64
    }

    fn prior_energy(&self, x: &[f64]) -> f64 {
        let eps = self.smoothing;
        x.iter()
            .zip(&self.shape)
            .zip(&self.inv_scale)
            .map(|((&xi, &s), &ig)| (xi * xi + eps).powf(0.5 * s) * ig)
            .sum()
    }

    /// `U(x)`.
    pub fn potential(&mut self, x: &[f64]) -> f64 {
        let misfit = self.residual_energy_in_spectrum(x);
        misfit * self.inv_two_sigma2 + self.prior_energy(x)
    }

    /// `U(x)` and `∇U(x)` with one forward and one inverse transform.
    pub fn potential_and_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let misfit = self.residual_energy_in_spectrum(x);
        for (s, &h) in self.spec.iter_mut().zip(self.op.otf()) {
            *s *= h.conj();
        }
        self.op
            .fft()
            .inverse(&mut self.spec, &mut self.grad_lik, &mut self.ws);
        // Hᵀ(Hx − y)/σ²
        let lik_scale = 2.0 * self.inv_two_sigma2;
        let eps = self.smoothing;
        let mut prior = 0.0;
        for n in 0..x.len() {
            let xi = x[n];
            let s = self.shape[n];
            let ig = self.inv_scale[n];
            let m2 = xi * xi + eps;
            let pw = m2.powf(0.5 * s);
            prior += pw * ig;
            grad[n] = lik_scale * self.grad_lik[n] + s * xi * pw / m2 * ig;
        }
        misfit * self.inv_two_sigma2 + prior
    }
}

/// Outcome of one leapfrog trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub h_start: f64,
    pub h_end: f64,
    pub potential_start: f64,
    pub potential_end: f64,
}

/// Integrates `steps` leapfrog steps of size `eps` in place.
///
/// `grad` must hold `∇U(x)` on entry and holds `∇U` at the end point on exit.
/// Returns `U` at the end point.
pub fn leapfrog(
    target: &mut ReflectivityTarget<'_>,
    x: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    eps: f64,
    steps: usize,
) -> f64 {
    let mut u = f64::NAN;
    for v in p.iter_mut().zip(grad.iter()) {
        *v.0 -= 0.5 * eps * v.1;
    }
    for step in 0..steps {
        for (xi, pi) in x.iter_mut().zip(p.iter()) {
            *xi += eps * pi;
        }
        u = target.potential_and_grad(x, grad);
        let w = if step + 1 == steps { 0.5 * eps } else { eps };
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi -= w * gi;
        }
    }
    if steps == 0 {
        // undo the opening half-kick
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi += 0.5 * eps * gi;
        }
        u = target.potential(x);
    }
    u
}

pub fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

/// Metropolis log acceptance ratio `H_old − H_new`; non-finite energies
/// map to `−∞` (certain rejection).
pub fn hmc_log_accept_ratio(h_old: f64, h_new: f64) -> f64 {
    let r = h_old - h_new;
    if r.is_nan() || !h_new.is_finite() {
        f64::NEG_INFINITY
    } else {
        r
    }
}

/// Draws fresh momenta, integrates, and returns the trajectory energies.
/// On return `x_prop` holds the proposal.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propose(
    target: &mut ReflectivityTarget<'_>,
    x: &[f64],
    x_prop: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    eps: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Trajectory {
    for v in p.iter_mut() {
        *v = standard_normal(rng);
    }
    x_prop.copy_from_slice(x);
    let u0 = target.potential_and_grad(x_prop, grad);
    let h_start = u0 + kinetic(p);
    let u1 = leapfrog(target, x_prop, p, grad, eps, steps);
    Trajectory {
        h_start,
        h_end: u1 + kinetic(p),
        potential_start: u0,
        potential_end: u1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::gaussian_psf;
    use rand::{Rng, SeedableRng};

    struct Fixture {
        op: CyclicBlurOperator,
        y: ImageGrid,
        z: LabelField,
        classes: Vec<GgdClassParams>,
    }

    fn fixture(seed: u64, shapes: &[f64]) -> Fixture {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = shapes.len();
        let op = CyclicBlurOperator::new(&gaussian_psf(3, 1.0).unwrap(), (8, 8)).unwrap();
        let y = ImageGrid::from_fn(8, 8, |_, _| rng.random::<f64>() * 2.0 - 1.0).unwrap();
        let z =
            LabelField::new(8, 8, k, (0..64).map(|_| rng.random_range(0..k)).collect()).unwrap();
        let classes = shapes
            .iter()
            .enumerate()
            .map(|(i, &s)| GgdClassParams::new(s, 0.5 + i as f64).unwrap())
            .collect();
        Fixture { op, y, z, classes }
    }

    fn random_x(seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // keep away from the smoothing scale around zero
        (0..64)
            .map(|_| {
                let m = 0.1 + rng.random::<f64>();
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = fixture(1, &[0.6, 1.5, 2.4]);
        let ys = ObservationSpectrum::new(&f.op, &f.y);
        let mut t = ReflectivityTarget::new(&f.op, &ys, 0.3, &f.classes, &f.z, 1e-8);
        let x = random_x(2);
        let mut g = vec![0.0; 64];
        t.potential_and_grad(&x, &mut g);
        let h = 1e-5;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..64 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (t.potential(&xp) - t.potential(&xm)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-3 * gmax));
        }
        assert!(worst <= 1e-5, "max relative gradient error {worst}");
    }

    #[test]
    fn potential_matches_direct_evaluation() {
        let f = fixture(3, &[0.8, 2.0]);
        let ys = ObservationSpectrum::new(&f.op, &f.y);
        let sigma2 = 0.7;
        let mut t = ReflectivityTarget::new(&f.op, &ys, sigma2, &f.classes, &f.z, 0.0);
        let x = random_x(4);
        let xg = ImageGrid::new(8, 8, x.clone()).unwrap();
        let hx = f.op.forward(&xg).unwrap();
        let misfit = hx.dist_sq(&f.y);
        let prior: f64 = (0..64)
            .map(|n| {
                let c = f.classes[f.z.class(n)];
                x[n].abs().powf(c.shape()) / c.scale()
            })
            .sum();
        let direct = misfit / (2.0 * sigma2) + prior;
        assert!((t.potential(&x) - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn zero_step_trajectory_is_identity_and_accepted() {
        let f = fixture(5, &[1.2]);
        let ys = ObservationSpectrum::new(&f.op, &f.y);
        let mut t = ReflectivityTarget::new(&f.op, &ys, 0.5, &f.classes, &f.z, 1e-8);
        let x = random_x(6);
        let mut xp = vec![0.0; 64];
        let mut p = vec![0.0; 64];
        let mut g = vec![0.0; 64];
        let mut rng = RngStream::new(1, 0);
        let traj = propose(&mut t, &x, &mut xp, &mut p, &mut g, 0.0, 10, &mut rng);
        assert_eq!(xp, x);
        assert_eq!(traj.h_start, traj.h_end);
        assert_eq!(hmc_log_accept_ratio(traj.h_start, traj.h_end), 0.0);
    }

    #[test]
    fn nonfinite_energy_rejects() {
        assert_eq!(hmc_log_accept_ratio(1.0, f64::NAN), f64::NEG_INFINITY);
        assert_eq!(hmc_log_accept_ratio(1.0, f64::INFINITY), f64::NEG_INFINITY);
        assert_eq!(hmc_log_accept_ratio(2.0, 1.0), 1.0);
    }

    #[test]
    fn leapfrog_is_reversible() {
        let f = fixture(7, &[1.7, 2.0]);
        let ys = ObservationSpectrum::new(&f.op, &f.y);
        let mut t = ReflectivityTarget::new(&f.op, &ys, 0.5, &f.classes, &f.z, 1e-8);
        let x0 = random_x(8);
        let mut x = x0.clone();
        let mut rng = RngStream::new(2, 0);
        let mut p: Vec<f64> = (0..64).map(|_| standard_normal(&mut rng)).collect();
        let p0 = p.clone();
        let mut g = vec![0.0; 64];
        t.potential_and_grad(&x, &mut g);
        leapfrog(&mut t, &mut x, &mut p, &mut g, 0.01, 20);
        p.iter_mut().for_each(|v| *v = -*v);
        leapfrog(&mut t, &mut x, &mut p, &mut g, 0.01, 20);
        for i in 0..64 {
            assert!((x[i] - x0[i]).abs() < 1e-9);
            assert!((p[i] + p0[i]).abs() < 1e-9);
        }
    }
}
