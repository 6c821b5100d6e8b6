//! Synthetic ground truth: labeled geometries, GGD reflectivity fields,
//! and blur plus calibrated white Gaussian noise.

use crate::convolution::{gaussian_psf, CyclicBlurOperator};
use crate::distributions::{ggd_sample, standard_normal, GgdClassParams, RngStream};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LabelField};

/// One region of a phantom geometry. Coordinates are in pixels, with
/// `(row, col)` centres; classes are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Background {
        class: usize,
    },
    Disc {
        center: (f64, f64),
        radius: f64,
        class: usize,
    },
    Ellipse {
        center: (f64, f64),
        semi_axes: (f64, f64),
        class: usize,
    },
    Rectangle {
        row0: usize,
        col0: usize,
        height: usize,
        width: usize,
        class: usize,
    },
}

impl Region {
    fn class(&self) -> usize {
        match *self {
            Region::Background { class }
            | Region::Disc { class, .. }
            | Region::Ellipse { class, .. }
            | Region::Rectangle { class, .. } => class,
        }
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        let (rf, cf) = (r as f64, c as f64);
        match *self {
            Region::Background { .. } => true,
            Region::Disc { center, radius, .. } => {
                let (dr, dc) = (rf - center.0, cf - center.1);
                dr * dr + dc * dc <= radius * radius
            }
            Region::Ellipse {
                center, semi_axes, ..
            } => {
                let (dr, dc) = ((rf - center.0) / semi_axes.0, (cf - center.1) / semi_axes.1);
                dr * dr + dc * dc <= 1.0
            }
            Region::Rectangle {
                row0,
                col0,
                height,
                width,
                ..
            } => r >= row0 && r < row0 + height && c >= col0 && c < col0 + width,
        }
    }
}

/// Geometry and class statistics; later regions overwrite earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub classes: Vec<GgdClassParams>,
    pub regions: Vec<Region>,
}

/// Which parameter the two-band sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// `ξ = (1, ratio)`, `γ = (20, 20)`.
    Shape,
    /// `ξ = (1, 1)`, `γ = (20, 20·ratio)`.
    Scale,
}

/// Named phantom families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// One bright disc: (0.6, 1) inside, (1.8, 2) outside.
    Group1,
    /// Two discs: (0.8, 10) inside, (1.5, 1) outside.
    Group2,
    /// Background (0.5, 1), top skin band (1, 30), embedded ellipse (1.8, 2).
    Group3,
    /// Top and bottom halves differing in shape or scale.
    OaSweep { sweep: Sweep, ratio: f64 },
    /// A single class of i.i.d. GGD pixels.
    Iid { shape: f64, scale: f64 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Group1 => "group1",
            Preset::Group2 => "group2",
            Preset::Group3 => "group3",
            Preset::OaSweep { .. } => "oa-sweep",
            Preset::Iid { .. } => "iid",
        }
    }

    /// BSNR used for this family unless overridden.
    pub fn default_bsnr_db(&self) -> f64 {
        match self {
            Preset::Iid { .. } => 40.0,
            _ => 30.0,
        }
    }

    pub fn spec(&self, rows: usize, cols: usize) -> Result<PhantomSpec> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        let (h, w) = (rows as f64, cols as f64);
        let m = h.min(w);
        let p = |s: f64, g: f64| GgdClassParams::new(s, g);
        let (classes, regions) = match *self {
            Preset::Group1 => (
                vec![p(1.8, 2.0)?, p(0.6, 1.0)?],
                vec![
                    Region::Background { class: 0 },
                    Region::Disc {
                        center: ((h - 1.0) / 2.0, (w - 1.0) / 2.0),
                        radius: 0.25 * m,
                        class: 1,
                    },
                ],
            ),
            Preset::Group2 => (
                vec![p(0.8, 10.0)?, p(1.5, 1.0)?],
                vec![
                    Region::Background { class: 1 },
                    Region::Disc {
                        center: (0.32 * h, 0.30 * w),
                        radius: 0.16 * m,
                        class: 0,
                    },
                    Region::Disc {
                        center: (0.68 * h, 0.68 * w),
                        radius: 0.14 * m,
                        class: 0,
                    },
                ],
            ),
            Preset::Group3 => (
                vec![p(0.5, 1.0)?, p(1.0, 30.0)?, p(1.8, 2.0)?],
                vec![
                    Region::Background { class: 0 },
                    Region::Rectangle {
                        row0: 0,
                        col0: 0,
                        height: (0.2 * h).round() as usize,
                        width: cols,
                        class: 1,
                    },
                    Region::Ellipse {
                        center: (0.55 * h, 0.5 * w),
                        semi_axes: (0.18 * h, 0.3 * w),
                        class: 2,
                    },
                ],
            ),
            Preset::OaSweep { sweep, ratio } => {
                if !(ratio > 0.0 && ratio.is_finite()) {
                    return Err(Error::invalid(format!("sweep ratio {ratio} must be > 0")));
                }
                let second = match sweep {
                    Sweep::Shape => p(ratio, 20.0)?,
                    Sweep::Scale => p(1.0, 20.0 * ratio)?,
                };
                (
                    vec![p(1.0, 20.0)?, second],
                    vec![
                        Region::Background { class: 0 },
                        Region::Rectangle {
                            row0: rows / 2,
                            col0: 0,
                            height: rows - rows / 2,
                            width: cols,
                            class: 1,
                        },
                    ],
                )
            }
            Preset::Iid { shape, scale } => (
                vec![p(shape, scale)?],
                vec![Region::Background { class: 0 }],
            ),
        };
        Ok(PhantomSpec {
            rows,
            cols,
            classes,
            regions,
        })
    }
}

/// Point spread function shared by all presets: 5×5 Gaussian, variance 3.
pub fn default_psf() -> ImageGrid {
    gaussian_psf(5, 3.0).expect("valid kernel")
}

/// Rasterizes the geometry; a pixel is inside a disc when its centre
/// distance is at most the radius.
pub fn render_labels(spec: &PhantomSpec) -> Result<LabelField> {
    let k = spec.classes.len();
    if k == 0 {
        return Err(Error::invalid("phantom needs at least one class"));
    }
    if let Some(r) = spec.regions.iter().find(|r| r.class() >= k) {
        return Err(Error::invalid(format!(
            "region class {} outside 1..={k}",
            r.class() + 1
        )));
    }
    let mut out = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let class = spec
                .regions
                .iter()
                .rev()
                .find(|g| g.contains(r, c))
                .map(Region::class);
            match class {
                Some(k) => out.push(k),
                None => {
                    return Err(Error::invalid(format!(
                        "pixel ({r}, {c}) is not covered by any region"
                    )))
                }
            }
        }
    }
    LabelField::new(spec.rows, spec.cols, k, out)
}

/// Independent GGD draws, one per pixel, from the pixel's class.
pub fn draw_trf(
    labels: &LabelField,
    classes: &[GgdClassParams],
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    if classes.len() != labels.k_classes() {
        return Err(Error::invalid(format!(
            "{} class parameter sets for a K={} label field",
            classes.len(),
            labels.k_classes()
        )));
    }
    let data = labels
        .classes()
        .iter()
        .map(|&k| ggd_sample(&classes[k], rng))
        .collect();
    ImageGrid::new(labels.rows(), labels.cols(), data)
}

/// Noise variance giving blurred-signal SNR `bsnr_db`:
/// `‖Hx − mean(Hx)‖² / (N · 10^{BSNR/10})`.
pub fn bsnr_noise_variance(hx: &ImageGrid, bsnr_db: f64) -> Result<f64> {
    let mean = hx.mean();
    let energy: f64 = hx.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum();
    if energy <= 0.0 {
        return Err(Error::degenerate("blurred signal is constant"));
    }
    if bsnr_db == f64::INFINITY {
        return Ok(0.0);
    }
    if bsnr_db.is_nan() || bsnr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("BSNR {bsnr_db} dB is not usable")));
    }
    Ok(energy / (hx.len() as f64 * 10f64.powf(bsnr_db / 10.0)))
}

/// `y = Hx + n`, `n ~ N(0, σ²I)` with σ² set by the BSNR; `+∞` dB gives
/// `y = Hx` and `σ² = 0`.
pub fn degrade(
    x: &ImageGrid,
    op: &CyclicBlurOperator,
    bsnr_db: f64,
    rng: &mut RngStream,
) -> Result<(ImageGrid, f64)> {
    let mut y = op.forward(x)?;
    let sigma2 = bsnr_noise_variance(&y, bsnr_db)?;
    if sigma2 > 0.0 {
        let s = sigma2.sqrt();
        for v in y.as_mut_slice() {
            *v += s * standard_normal(rng);
        }
    }
    Ok((y, sigma2))
}

/// A full synthetic data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub x: ImageGrid,
    pub z: LabelField,
    pub y: ImageGrid,
    pub psf: ImageGrid,
    pub sigma2: f64,
    pub bsnr_db: f64,
}

/// Renders labels, draws the reflectivity from stream 0 and the noise from
/// stream 1 of `seed`.
pub fn simulate(spec: &PhantomSpec, psf: &ImageGrid, bsnr_db: f64, seed: u64) -> Result<Phantom> {
    let z = render_labels(spec)?;
    let x = draw_trf(&z, &spec.classes, &mut RngStream::new(seed, 0))?;
    let op = CyclicBlurOperator::new(psf, (spec.rows, spec.cols))?;
    let (y, sigma2) = degrade(&x, &op, bsnr_db, &mut RngStream::new(seed, 1))?;
    Ok(Phantom {
        spec: spec.clone(),
        x,
        z,
        y,
        psf: op.psf().clone(),
        sigma2,
        bsnr_db,
    })
}
