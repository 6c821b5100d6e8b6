//! The individual conditional moves of one sampler cycle.

use crate::convolution::CyclicBlurOperator;
use crate::distributions::{
    ggd_log_norm_const, inverse_gamma_sample, log_categorical_sample, truncated_normal_log_pdf,
    truncated_normal_sample, GgdClassParams, InverseGammaParams, RngStream, SHAPE_MAX,
};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LabelField};
use crate::potts::{for_each_neighbor, PottsConfig};
use rand::Rng;

use super::{LabelOrder, ModelHyperparams};

/// Result of a Metropolis-type move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveOutcome {
    Accepted,
    Rejected,
    Skipped,
}

impl MoveOutcome {
    /// Trace encoding: 1 accepted, 0 rejected, −1 skipped.
    pub fn code(self) -> i8 {
        match self {
            MoveOutcome::Accepted => 1,
            MoveOutcome::Rejected => 0,
            MoveOutcome::Skipped => -1,
        }
    }
}

/// Draws `σ² ~ IG(α + N/2, ν + ½‖y − Hx‖²)`.
pub fn sample_noise_variance(
    x: &ImageGrid,
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    hyper: &ModelHyperparams,
    rng: &mut RngStream,
) -> Result<f64> {
    let misfit = op.forward(x)?.dist_sq(y);
    noise_variance_from_misfit(misfit, y.len(), hyper, rng)
}

pub(crate) fn noise_variance_from_misfit(
    misfit: f64,
    n: usize,
    hyper: &ModelHyperparams,
    rng: &mut RngStream,
) -> Result<f64> {
    if !misfit.is_finite() {
        return Err(Error::numeric(format!("non-finite data misfit {misfit}")));
    }
    let p = InverseGammaParams::new(
        hyper.noise_alpha + 0.5 * n as f64,
        hyper.noise_nu + 0.5 * misfit,
    )?;
    let s = inverse_gamma_sample(&p, rng);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::numeric(format!(
            "noise variance draw {s} is not positive and finite"
        )));
    }
    Ok(s)
}

/// `N_k log a(ξ, γ) − Σ |x|^ξ / γ`, the unnormalized log conditional of the
/// shape on `(0, SHAPE_MAX]` under a flat prior.
pub fn shape_log_target(magnitudes: &[f64], shape: f64, scale: f64) -> f64 {
    if !(shape > 0.0 && shape <= SHAPE_MAX) {
        return f64::NEG_INFINITY;
    }
    let s: f64 = magnitudes.iter().map(|m| m.powf(shape)).sum();
    magnitudes.len() as f64 * ggd_log_norm_const(shape, scale) - s / scale
}

/// One random-walk Metropolis–Hastings update of a class shape.
///
/// `magnitudes` are `|x_n|` for pixels in the class and `delta` is the
/// proposal variance. With `hastings = false` the proposal-density ratio is
/// dropped from the acceptance ratio.
pub fn rwmh_shape_step(
    magnitudes: &[f64],
    current: GgdClassParams,
    delta: f64,
    hastings: bool,
    rng: &mut RngStream,
) -> Result<(f64, MoveOutcome)> {
    let xi = current.shape();
    if magnitudes.is_empty() {
        return Ok((xi, MoveOutcome::Skipped));
    }
    let prop = truncated_normal_sample(xi, delta, 0.0, SHAPE_MAX, rng)?;
    let log_ratio = rwmh_log_ratio(magnitudes, xi, prop, current.scale(), delta, hastings);
    let u: f64 = rng.random();
    // NaN ratios fail the comparison and reject
    if u.ln() < log_ratio {
        Ok((prop, MoveOutcome::Accepted))
    } else {
        Ok((xi, MoveOutcome::Rejected))
    }
}

/// Log acceptance ratio for moving the shape from `xi` to `prop`.
pub fn rwmh_log_ratio(
    magnitudes: &[f64],
    xi: f64,
    prop: f64,
    scale: f64,
    delta: f64,
    hastings: bool,
) -> f64 {
    let mut r = shape_log_target(magnitudes, prop, scale) - shape_log_target(magnitudes, xi, scale);
    if hastings {
        r += truncated_normal_log_pdf(xi, prop, delta, 0.0, SHAPE_MAX)
            - truncated_normal_log_pdf(prop, xi, delta, 0.0, SHAPE_MAX);
    }
    r
}

/// Draws `γ ~ IG(N_k/ξ, Σ |x|^ξ)`; holds `current` when the class is empty
/// or the sum vanishes.
pub fn sample_scale(magnitudes: &[f64], shape: f64, current: f64, rng: &mut RngStream) -> f64 {
    if magnitudes.is_empty() {
        return current;
    }
    let s: f64 = magnitudes.iter().map(|m| m.powf(shape)).sum();
    if !(s > 0.0 && s.is_finite()) {
        return current;
    }
    match InverseGammaParams::new(magnitudes.len() as f64 / shape, s) {
        Ok(p) => {
            let g = inverse_gamma_sample(&p, rng);
            if g > 0.0 && g.is_finite() {
                g
            } else {
                current
            }
        }
        Err(_) => current,
    }
}

/// One Gibbs sweep over all labels, in place.
pub fn sweep_labels(
    x: &ImageGrid,
    z: &mut LabelField,
    classes: &[GgdClassParams],
    potts: &PottsConfig,
    order: LabelOrder,
    rng: &mut RngStream,
) -> Result<()> {
    let k = classes.len();
    if z.k_classes() != k {
        return Err(Error::invalid(format!(
            "label field has K={} but {k} classes given",
            z.k_classes()
        )));
    }
    if k == 1 {
        return Ok(());
    }
    let log_a: Vec<f64> = classes.iter().map(|c| c.log_norm_const()).collect();
    let mut lw = vec![0.0; k];
    let mut scratch = vec![0.0; k];
    let (rows, cols) = z.dims();
    let beta = potts.beta();
    let mut visit = |n: usize, z: &mut LabelField| -> Result<()> {
        let m = x.as_slice()[n].abs();
        for (j, c) in classes.iter().enumerate() {
            lw[j] = log_a[j] - m.powf(c.shape()) / c.scale();
        }
        for_each_neighbor(n, rows, cols, |q| lw[z.class(q)] += beta);
        let draw = log_categorical_sample(&lw, &mut scratch, rng)
            .map_err(|e| Error::numeric(format!("label weights at pixel {n}: {e}")))?;
        z.set_class(n, draw);
        Ok(())
    };
    match order {
        LabelOrder::Raster => {
            for n in 0..rows * cols {
                visit(n, z)?;
            }
        }
        LabelOrder::Checkerboard => {
            for parity in 0..2 {
                for r in 0..rows {
                    for c in 0..cols {
                        if (r + c) % 2 == parity {
                            visit(r * cols + c, z)?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::gaussian_psf;
    use crate::distributions::ggd_sample;

    fn hyper() -> ModelHyperparams {
        ModelHyperparams::new(2).unwrap()
    }

    #[test]
    fn noise_variance_zero_residual_draws_from_prior_update() {
        let op = CyclicBlurOperator::new(&gaussian_psf(1, 1.0).unwrap(), (2, 2)).unwrap();
        let x = ImageGrid::new(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let y = op.forward(&x).unwrap();
        // IG(2.1, 0.1): mean 0.1/1.1
        let mut rng = RngStream::new(3, 0);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| sample_noise_variance(&x, &y, &op, &hyper(), &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.1 / 1.1).abs() < 0.03 * 0.1 / 1.1, "mean {mean}");
    }

    #[test]
    fn noise_variance_with_residual_two() {
        let mut rng = RngStream::new(4, 0);
        // IG(2.1, ·) has standard deviation 3.2× its mean
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| noise_variance_from_misfit(2.0, 4, &hyper(), &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(noise_variance_from_misfit(f64::NAN, 4, &hyper(), &mut rng).is_err());
    }

    #[test]
    fn empty_class_skips_shape_and_holds_scale() {
        let mut rng = RngStream::new(5, 0);
        let p = GgdClassParams::new(1.3, 0.7).unwrap();
        let (xi, out) = rwmh_shape_step(&[], p, 0.05, true, &mut rng).unwrap();
        assert_eq!((xi, out), (1.3, MoveOutcome::Skipped));
        assert_eq!(sample_scale(&[], 1.3, 0.7, &mut rng), 0.7);
        assert_eq!(sample_scale(&[0.0, 0.0], 1.3, 0.7, &mut rng), 0.7);
    }

    #[test]
    fn identical_target_and_symmetric_proposal_give_unit_ratio() {
        let m = [0.3, 1.2];
        for xi in [0.4, 1.0, 2.9] {
            assert_eq!(rwmh_log_ratio(&m, xi, xi, 1.1, 0.05, true), 0.0);
            assert_eq!(rwmh_log_ratio(&m, xi, xi, 1.1, 0.05, false), 0.0);
        }
        assert_eq!(shape_log_target(&m, 0.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(shape_log_target(&m, 3.1, 1.0), f64::NEG_INFINITY);
        assert!(shape_log_target(&m, 3.0, 1.0).is_finite());
    }

    #[test]
    fn hastings_term_is_the_truncation_mass_ratio() {
        // near the upper bound the two truncated kernels lose different mass
        let m = [0.5];
        let (xi, prop, d) = (2.95, 2.7, 0.04f64);
        let sd = d.sqrt();
        let mass =
            |c: f64| crate::distributions::ln_normal_interval_mass(-c / sd, (SHAPE_MAX - c) / sd);
        let with = rwmh_log_ratio(&m, xi, prop, 1.0, d, true);
        let without = rwmh_log_ratio(&m, xi, prop, 1.0, d, false);
        assert!((with - without - (mass(xi) - mass(prop))).abs() < 1e-12);
        assert!(mass(xi) < mass(prop));
    }

    #[test]
    fn shape_log_target_matches_density_sum() {
        let m = [0.2, 0.9, 1.7];
        let p = GgdClassParams::new(0.8, 1.4).unwrap();
        let direct: f64 = m
            .iter()
            .map(|&v| crate::distributions::ggd_log_pdf(v, &p))
            .sum();
        assert!((shape_log_target(&m, 0.8, 1.4) - direct).abs() < 1e-12);
    }

    #[test]
    fn shape_chain_is_stationary_for_its_target() {
        // Small class: the conditional of ξ on (0,3] is broad, so the
        // RWMH chain's mean can be compared to a quadrature mean.
        let m = [0.4, 1.1, 0.05, 2.3, 0.7];
        let gamma = 1.3;
        let grid = 6000;
        let (mut z0, mut z1) = (0.0, 0.0);
        let maxlt = (1..grid)
            .map(|i| shape_log_target(&m, 3.0 * i as f64 / grid as f64, gamma))
            .fold(f64::NEG_INFINITY, f64::max);
        for i in 1..grid {
            let xi = 3.0 * (i as f64) / grid as f64;
            let w = (shape_log_target(&m, xi, gamma) - maxlt).exp();
            z0 += w;
            z1 += w * xi;
        }
        let exact = z1 / z0;
        let mut rng = RngStream::new(6, 0);
        let mut p = GgdClassParams::new(1.0, gamma).unwrap();
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (xi, _) = rwmh_shape_step(&m, p, 0.5, true, &mut rng).unwrap();
            p = GgdClassParams::new(xi, gamma).unwrap();
            acc += xi;
        }
        let mean = acc / n as f64;
        assert!(
            (mean - exact).abs() < 0.02,
            "chain mean {mean} vs exact {exact}"
        );
    }

    #[test]
    fn scale_draws_have_inverse_gamma_mean() {
        let truth = GgdClassParams::new(0.6, 0.37).unwrap();
        let mut rng = RngStream::new(7, 0);
        let m: Vec<f64> = (0..10_000)
            .map(|_| ggd_sample(&truth, &mut rng).abs())
            .collect();
        let s: f64 = m.iter().map(|v| v.powf(0.6)).sum();
        let expected = s / (m.len() as f64 / 0.6 - 1.0);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| sample_scale(&m, 0.6, 1.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn single_class_sweep_leaves_field() {
        let x = ImageGrid::filled(3, 3, 0.5).unwrap();
        let mut z = LabelField::constant(3, 3, 1, 0).unwrap();
        let classes = [GgdClassParams::new(1.0, 1.0).unwrap()];
        let mut rng = RngStream::new(8, 0);
        sweep_labels(
            &x,
            &mut z,
            &classes,
            &PottsConfig::new(1.0, 1).unwrap(),
            LabelOrder::Raster,
            &mut rng,
        )
        .unwrap();
        assert!(z.labels().iter().all(|&l| l == 1));
    }

    fn centre_frequency(
        x: &ImageGrid,
        z0: &LabelField,
        classes: &[GgdClassParams],
        beta: f64,
        draws: usize,
    ) -> f64 {
        // frequency of class 0 at the centre pixel when all neighbours are
        // held at their initial values: resweep only the centre
        let cfg = PottsConfig::new(beta, classes.len()).unwrap();
        let mut rng = RngStream::new(9, 0);
        let mut hits = 0usize;
        for _ in 0..draws {
            let mut z = z0.clone();
            // visiting pixel 4 in isolation mirrors one step of the sweep
            let mut lw = vec![0.0; classes.len()];
            let mut scratch = lw.clone();
            let m = x.as_slice()[4].abs();
            for (j, c) in classes.iter().enumerate() {
                lw[j] = c.log_norm_const() - m.powf(c.shape()) / c.scale();
            }
            for_each_neighbor(4, 3, 3, |q| lw[z.class(q)] += cfg.beta());
            let d = log_categorical_sample(&lw, &mut scratch, &mut rng).unwrap();
            z.set_class(4, d);
            if z.class(4) == 0 {
                hits += 1;
            }
        }
        hits as f64 / draws as f64
    }

    #[test]
    fn two_class_bayes_rule_without_field() {
        let x = ImageGrid::filled(3, 3, 0.8).unwrap();
        let z = LabelField::constant(3, 3, 2, 1).unwrap();
        let c = [
            GgdClassParams::new(2.0, 0.5).unwrap(),
            GgdClassParams::new(2.0, 3.0).unwrap(),
        ];
        let l0 = (c[0].log_norm_const() - 0.64 / 0.5).exp();
        let l1 = (c[1].log_norm_const() - 0.64 / 3.0).exp();
        let exact = l0 / (l0 + l1);
        let f = centre_frequency(&x, &z, &c, 0.0, 200_000);
        let se = (exact * (1.0 - exact) / 200_000.0).sqrt();
        assert!((f - exact).abs() < 4.0 * se, "{f} vs {exact}");
    }

    #[test]
    fn sweep_probability_with_four_agreeing_neighbours() {
        let x = ImageGrid::filled(3, 3, 0.8).unwrap();
        let z = LabelField::constant(3, 3, 3, 0).unwrap();
        let p = GgdClassParams::new(1.5, 1.0).unwrap();
        let c = [p, p, p];
        let exact = 4f64.exp() / (4f64.exp() + 2.0);
        let f = centre_frequency(&x, &z, &c, 1.0, 200_000);
        let se = (exact * (1.0 - exact) / 200_000.0).sqrt();
        assert!((f - exact).abs() < 4.0 * se, "{f} vs {exact}");
    }

    #[test]
    fn full_sweep_agrees_with_centre_conditional() {
        // With K identical classes and β=1, a sweep over a field whose
        // centre is the only free pixel reproduces the same conditional.
        let x = ImageGrid::filled(3, 3, 0.3).unwrap();
        let p = GgdClassParams::new(1.0, 1.0).unwrap();
        let classes = [p, p];
        let cfg = PottsConfig::new(1.0, 2).unwrap();
        let mut rng = RngStream::new(10, 0);
        // from an all-zero field, the first visited pixel (0) has 2 agreeing
        // neighbours: P(class 0) = e²/(e²+1)
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            let mut z = LabelField::constant(3, 3, 2, 0).unwrap();
            sweep_labels(&x, &mut z, &classes, &cfg, LabelOrder::Raster, &mut rng).unwrap();
            if z.class(0) == 0 {
                hits += 1;
            }
        }
        let exact = 2f64.exp() / (2f64.exp() + 1.0);
        let f = hits as f64 / n as f64;
        assert!((f - exact).abs() < 4.0 * (exact * (1.0 - exact) / n as f64).sqrt());
    }

    #[test]
    fn checkerboard_order_visits_every_pixel() {
        // overwhelming likelihood for class 1 forces every visited pixel
        let x = ImageGrid::filled(4, 5, 10.0).unwrap();
        let mut z = LabelField::constant(4, 5, 2, 0).unwrap();
        let classes = [
            GgdClassParams::new(2.0, 0.01).unwrap(),
            GgdClassParams::new(2.0, 100.0).unwrap(),
        ];
        let mut rng = RngStream::new(11, 0);
        sweep_labels(
            &x,
            &mut z,
            &classes,
            &PottsConfig::new(1.0, 2).unwrap(),
            LabelOrder::Checkerboard,
            &mut rng,
        )
        .unwrap();
        assert!(z.classes().iter().all(|&c| c == 1));
    }
}
