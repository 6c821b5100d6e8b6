//! Hybrid Gibbs sampler for the joint posterior of reflectivity, labels,
//! class parameters and noise variance.
//!
//! One cycle draws, in order: the noise variance, each class shape
//! (random-walk Metropolis–Hastings), each class scale, the label field
//! (one Gibbs sweep), and the reflectivity (Hamiltonian Monte Carlo).

pub mod accumulators;
pub mod hmc;
pub mod moves;

use crate::convolution::CyclicBlurOperator;
use crate::distributions::{GgdClassParams, RngStream};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LabelField};
use crate::potts::PottsConfig;

pub use accumulators::{AcceptanceCounter, ChainTraces, PosteriorAccumulators};
pub use moves::MoveOutcome;

use hmc::{hmc_log_accept_ratio, ObservationSpectrum, ReflectivityTarget};
use rand::Rng;

/// Fixed model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelHyperparams {
    /// Inverse-gamma shape of the noise-variance prior.
    pub noise_alpha: f64,
    /// Inverse-gamma scale of the noise-variance prior.
    pub noise_nu: f64,
    pub beta: f64,
    pub k_classes: usize,
    /// Smoothing constant in `√(x² + ε)` used by the reflectivity move.
    pub smoothing: f64,
}

impl ModelHyperparams {
    pub fn new(k_classes: usize) -> Result<Self> {
        Self {
            noise_alpha: 0.1,
            noise_nu: 0.1,
            beta: 1.0,
            k_classes,
            smoothing: 1e-8,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.noise_alpha > 0.0 && self.noise_alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "noise prior shape {} must be > 0",
                self.noise_alpha
            )));
        }
        if !(self.noise_nu > 0.0 && self.noise_nu.is_finite()) {
            return Err(Error::invalid(format!(
                "noise prior scale {} must be > 0",
                self.noise_nu
            )));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothing {} must be >= 0",
                self.smoothing
            )));
        }
        PottsConfig::new(self.beta, self.k_classes)?;
        Ok(self)
    }

    pub fn potts(&self) -> PottsConfig {
        PottsConfig::new(self.beta, self.k_classes).expect("validated hyperparameters")
    }
}

/// Initial HMC step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepInit {
    Fixed(f64),
    /// `σ / max|H| · N^{-1/4}`, evaluated after the first noise draw.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelOrder {
    #[default]
    Raster,
    Checkerboard,
}

/// Blocks held at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrozenBlocks {
    pub noise: bool,
    pub shape: bool,
    pub scale: bool,
    pub labels: bool,
    pub reflectivity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    /// Inclusive range of leapfrog step counts.
    pub leapfrog: (usize, usize),
    pub step_init: StepInit,
    /// Initial RWMH proposal variance for every class.
    pub rwmh_delta_init: f64,
    pub adapt_window: usize,
    pub accept_band: (f64, f64),
    pub adapt_factor: f64,
    pub seed: u64,
    pub stream: u64,
    /// Drop the proposal-density ratio from the shape acceptance ratio.
    pub uncorrected_shape_ratio: bool,
    /// Shrink steps on high acceptance and grow them on low acceptance.
    pub inverted_adapt_direction: bool,
    pub label_order: LabelOrder,
    pub frozen: FrozenBlocks,
}

impl SamplerConfig {
    pub fn new(n_iter: usize, n_burnin: usize, seed: u64) -> Result<Self> {
        Self {
            n_iter,
            n_burnin,
            leapfrog: (50, 70),
            step_init: StepInit::Auto,
            rwmh_delta_init: 0.05,
            adapt_window: 100,
            accept_band: (0.30, 0.90),
            adapt_factor: 0.20,
            seed,
            stream: 0,
            uncorrected_shape_ratio: false,
            inverted_adapt_direction: false,
            label_order: LabelOrder::Raster,
            frozen: FrozenBlocks::default(),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_burnin >= self.n_iter {
            return Err(Error::invalid(format!(
                "burn-in {} must be smaller than the iteration count {}",
                self.n_burnin, self.n_iter
            )));
        }
        let (lo, hi) = self.leapfrog;
        if lo < 1 || lo > hi {
            return Err(Error::invalid(format!(
                "leapfrog range [{lo}, {hi}] must satisfy 1 <= lo <= hi"
            )));
        }
        if let StepInit::Fixed(e) = self.step_init {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!("step size {e} must be > 0")));
            }
        }
        if !(self.rwmh_delta_init > 0.0 && self.rwmh_delta_init.is_finite()) {
            return Err(Error::invalid(format!(
                "proposal variance {} must be > 0",
                self.rwmh_delta_init
            )));
        }
        if self.adapt_window == 0 {
            return Err(Error::invalid("adaptation window must be positive"));
        }
        let (a, b) = self.accept_band;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::invalid(format!(
                "acceptance band [{a}, {b}] must lie in [0, 1]"
            )));
        }
        if !(self.adapt_factor > 0.0 && self.adapt_factor < 1.0) {
            return Err(Error::invalid(format!(
                "adaptation factor {} must be in (0, 1)",
                self.adapt_factor
            )));
        }
        Ok(self)
    }

    /// Multiplier for a step given a window's acceptance rate.
    pub fn adapt_multiplier(&self, rate: f64) -> f64 {
        let (lo, hi) = self.accept_band;
        let (grow, shrink) = (1.0 + self.adapt_factor, 1.0 - self.adapt_factor);
        let (on_high, on_low) = if self.inverted_adapt_direction {
            (shrink, grow)
        } else {
            (grow, shrink)
        };
        if rate > hi {
            on_high
        } else if rate < lo {
            on_low
        } else {
            1.0
        }
    }

    /// `key=value` lines describing the sampler settings.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let step = match self.step_init {
            StepInit::Fixed(e) => format!("{e:e}"),
            StepInit::Auto => "auto".into(),
        };
        let f = &self.frozen;
        let frozen: Vec<&str> = [
            (f.noise, "noise"),
            (f.shape, "shape"),
            (f.scale, "scale"),
            (f.labels, "labels"),
            (f.reflectivity, "reflectivity"),
        ]
        .iter()
        .filter_map(|&(on, name)| on.then_some(name))
        .collect();
        vec![
            ("n_iter".into(), self.n_iter.to_string()),
            ("n_burnin".into(), self.n_burnin.to_string()),
            ("leapfrog_min".into(), self.leapfrog.0.to_string()),
            ("leapfrog_max".into(), self.leapfrog.1.to_string()),
            ("eps_init".into(), step),
            (
                "rwmh_delta_init".into(),
                format!("{}", self.rwmh_delta_init),
            ),
            ("adapt_window".into(), self.adapt_window.to_string()),
            (
                "accept_band".into(),
                format!("{},{}", self.accept_band.0, self.accept_band.1),
            ),
            ("adapt_factor".into(), format!("{}", self.adapt_factor)),
            ("seed".into(), self.seed.to_string()),
            ("stream".into(), self.stream.to_string()),
            (
                "uncorrected_shape_ratio".into(),
                self.uncorrected_shape_ratio.to_string(),
            ),
            (
                "inverted_adapt_direction".into(),
                self.inverted_adapt_direction.to_string(),
            ),
            (
                "label_order".into(),
                match self.label_order {
                    LabelOrder::Raster => "raster".into(),
                    LabelOrder::Checkerboard => "checkerboard".into(),
                },
            ),
            (
                "frozen".into(),
                if frozen.is_empty() {
                    "none".into()
                } else {
                    frozen.join(",")
                },
            ),
            ("init_x".into(), "y".into()),
            ("init_labels".into(), "uniform".into()),
            ("init_shape".into(), "1.0".into()),
            ("init_scale".into(), "class_mean_abs_y".into()),
        ]
    }
}

/// Current values of every unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: ImageGrid,
    pub z: LabelField,
    pub sigma2: f64,
    pub classes: Vec<GgdClassParams>,
    pub rwmh_delta: Vec<f64>,
    pub hmc_eps: f64,
    pub iteration: usize,
}

impl ChainState {
    /// `x = y`, uniform random labels, unit shapes, and per-class mean `|y|`
    /// scales (global mean for empty classes).
    pub fn initial(y: &ImageGrid, k: usize, delta: f64, rng: &mut RngStream) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        let classes_idx: Vec<usize> = (0..y.len()).map(|_| rng.uniform_int(0, k - 1)).collect();
        let z = LabelField::new(y.rows(), y.cols(), k, classes_idx)?;
        let global = y.as_slice().iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (v, &c) in y.as_slice().iter().zip(z.classes()) {
            sums[c] += v.abs();
            counts[c] += 1;
        }
        let classes = (0..k)
            .map(|c| {
                let g = if counts[c] > 0 {
                    sums[c] / counts[c] as f64
                } else {
                    global
                };
                let g = if g > 0.0 { g } else { 1.0 };
                GgdClassParams::new(1.0, g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            x: y.clone(),
            z,
            sigma2: 1.0,
            classes,
            rwmh_delta: vec![delta; k],
            hmc_eps: f64::NAN,
            iteration: 0,
        })
    }

    fn validate(&self, y: &ImageGrid, k: usize) -> Result<()> {
        self.x.ensure_same_dims(y)?;
        self.z.ensure_matches(y)?;
        if self.classes.len() != k || self.z.k_classes() != k || self.rwmh_delta.len() != k {
            return Err(Error::invalid(format!(
                "initial state does not have {k} classes"
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "initial noise variance {} must be > 0",
                self.sigma2
            )));
        }
        if self.rwmh_delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("proposal variances must be > 0"));
        }
        Ok(())
    }

    fn magnitudes_by_class(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.classes.len()];
        for (v, &c) in self.x.as_slice().iter().zip(self.z.classes()) {
            out[c].push(v.abs());
        }
        out
    }
}

/// Everything a finished chain produces.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub accumulators: PosteriorAccumulators,
    pub traces: ChainTraces,
    pub final_state: ChainState,
}

/// A single chain that can be advanced one cycle at a time.
pub struct Chain<'a> {
    y: &'a ImageGrid,
    op: &'a CyclicBlurOperator,
    y_spec: ObservationSpectrum,
    hyper: ModelHyperparams,
    potts: PottsConfig,
    config: SamplerConfig,
    state: ChainState,
    rng: RngStream,
    acc: PosteriorAccumulators,
    traces: ChainTraces,
    eps_pending: bool,
    x_prop: Vec<f64>,
    momentum: Vec<f64>,
    grad: Vec<f64>,
    window_hmc: AcceptanceCounter,
    window_rwmh: Vec<AcceptanceCounter>,
}

impl<'a> Chain<'a> {
    /// `init = None` uses [`ChainState::initial`] drawn from the chain's stream.
    pub fn new(
        y: &'a ImageGrid,
        op: &'a CyclicBlurOperator,
        hyper: ModelHyperparams,
        config: SamplerConfig,
        init: Option<ChainState>,
    ) -> Result<Self> {
        let hyper = hyper.validated()?;
        let config = config.validated()?;
        if op.dims() != y.dims() {
            return Err(Error::DimensionMismatch {
                expected: op.dims(),
                found: y.dims(),
            });
        }
        let k = hyper.k_classes;
        let mut rng = RngStream::new(config.seed, config.stream);
        let mut state = match init {
            Some(s) => {
                s.validate(y, k)?;
                s
            }
            None => ChainState::initial(y, k, config.rwmh_delta_init, &mut rng)?,
        };
        let eps_pending = match config.step_init {
            StepInit::Fixed(e) => {
                state.hmc_eps = e;
                false
            }
            StepInit::Auto => true,
        };
        let n = y.len();
        Ok(Self {
            y,
            op,
            y_spec: ObservationSpectrum::new(op, y),
            potts: hyper.potts(),
            hyper,
            state,
            rng,
            acc: PosteriorAccumulators::new(y.rows(), y.cols(), k),
            traces: ChainTraces::new(k, config.n_burnin),
            config,
            eps_pending,
            x_prop: vec![0.0; n],
            momentum: vec![0.0; n],
            grad: vec![0.0; n],
            window_hmc: AcceptanceCounter::default(),
            window_rwmh: vec![AcceptanceCounter::default(); k],
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn traces(&self) -> &ChainTraces {
        &self.traces
    }

    pub fn accumulators(&self) -> &PosteriorAccumulators {
        &self.acc
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.n_iter
    }

    /// Runs one full cycle of the five moves.
    pub fn step(&mut self) -> Result<()> {
        let t = self.state.iteration + 1;
        let k = self.hyper.k_classes;
        let frozen = self.config.frozen;

        if !frozen.noise {
            self.state.sigma2 = moves::sample_noise_variance(
                &self.state.x,
                self.y,
                self.op,
                &self.hyper,
                &mut self.rng,
            )
            .map_err(|e| at(t, "noise variance", e))?;
        }
        if self.eps_pending {
            let n = self.y.len() as f64;
            self.state.hmc_eps = self.state.sigma2.sqrt() / self.op.max_gain() * n.powf(-0.25);
            self.eps_pending = false;
        }

        let mut rwmh_codes = vec![MoveOutcome::Skipped; k];
        if !frozen.shape || !frozen.scale {
            let mags = self.state.magnitudes_by_class();
            for c in 0..k {
                let mut p = self.state.classes[c];
                if !frozen.shape {
                    let (xi, out) = moves::rwmh_shape_step(
                        &mags[c],
                        p,
                        self.state.rwmh_delta[c],
                        !self.config.uncorrected_shape_ratio,
                        &mut self.rng,
                    )
                    .map_err(|e| at(t, "shape", e))?;
                    p = GgdClassParams::new(xi, p.scale()).map_err(|e| at(t, "shape", e))?;
                    rwmh_codes[c] = out;
                }
                if !frozen.scale {
                    let g = moves::sample_scale(&mags[c], p.shape(), p.scale(), &mut self.rng);
                    p = GgdClassParams::new(p.shape(), g).map_err(|e| at(t, "scale", e))?;
                }
                self.state.classes[c] = p;
            }
        }

        if !frozen.labels {
            moves::sweep_labels(
                &self.state.x,
                &mut self.state.z,
                &self.state.classes,
                &self.potts,
                self.config.label_order,
                &mut self.rng,
            )
            .map_err(|e| at(t, "labels", e))?;
        }

        let (hmc_code, potential) = self.reflectivity_move();

        // bookkeeping
        self.state.iteration = t;
        self.window_hmc.add(hmc_code);
        for (w, &code) in self.window_rwmh.iter_mut().zip(&rwmh_codes) {
            w.add(code);
        }
        if t <= self.config.n_burnin && t.is_multiple_of(self.config.adapt_window) {
            self.adapt();
        }
        self.record(t, hmc_code, &rwmh_codes, potential);
        Ok(())
    }

    fn reflectivity_move(&mut self) -> (MoveOutcome, f64) {
        let mut target = ReflectivityTarget::new(
            self.op,
            &self.y_spec,
            self.state.sigma2,
            &self.state.classes,
            &self.state.z,
            self.hyper.smoothing,
        );
        if self.config.frozen.reflectivity {
            return (
                MoveOutcome::Skipped,
                target.potential(self.state.x.as_slice()),
            );
        }
        let (lo, hi) = self.config.leapfrog;
        let steps = self.rng.uniform_int(lo, hi);
        let traj = hmc::propose(
            &mut target,
            self.state.x.as_slice(),
            &mut self.x_prop,
            &mut self.momentum,
            &mut self.grad,
            self.state.hmc_eps,
            steps,
            &mut self.rng,
        );
        let log_ratio = hmc_log_accept_ratio(traj.h_start, traj.h_end);
        if !traj.h_end.is_finite() {
            self.traces.hmc_nonfinite += 1;
        }
        let u: f64 = self.rng.random();
        if u.ln() < log_ratio {
            self.state.x.as_mut_slice().copy_from_slice(&self.x_prop);
            (MoveOutcome::Accepted, traj.potential_end)
        } else {
            (MoveOutcome::Rejected, traj.potential_start)
        }
    }

    fn adapt(&mut self) {
        if let Some(r) = self.window_hmc.rate() {
            self.state.hmc_eps *= self.config.adapt_multiplier(r);
        }
        for c in 0..self.hyper.k_classes {
            if let Some(r) = self.window_rwmh[c].rate() {
                self.state.rwmh_delta[c] *= self.config.adapt_multiplier(r);
            }
        }
        self.window_hmc = AcceptanceCounter::default();
        self.window_rwmh
            .iter_mut()
            .for_each(|w| *w = AcceptanceCounter::default());
    }

    fn record(&mut self, t: usize, hmc_code: MoveOutcome, rwmh: &[MoveOutcome], potential: f64) {
        let s = &self.state;
        let tr = &mut self.traces;
        tr.sigma2.push(s.sigma2);
        for (c, p) in s.classes.iter().enumerate() {
            tr.shape[c].push(p.shape());
            tr.scale[c].push(p.scale());
            tr.accept_rwmh[c].push(rwmh[c].code());
            tr.rwmh_delta[c].push(s.rwmh_delta[c]);
        }
        tr.accept_hmc.push(hmc_code.code());
        tr.potential.push(potential);
        tr.hmc_eps.push(s.hmc_eps);
        if t > self.config.n_burnin {
            self.acc.record(&s.x, &s.z);
        }
    }

    pub fn finish(self) -> ChainOutput {
        ChainOutput {
            accumulators: self.acc,
            traces: self.traces,
            final_state: self.state,
        }
    }
}

impl AcceptanceCounter {
    fn add(&mut self, o: MoveOutcome) {
        match o {
            MoveOutcome::Accepted => self.accepted += 1,
            MoveOutcome::Rejected => self.rejected += 1,
            MoveOutcome::Skipped => self.skipped += 1,
        }
    }
}

fn at(t: usize, what: &str, e: Error) -> Error {
    Error::numeric(format!("iteration {t}, {what} move: {e}"))
}

/// Runs one chain to completion.
pub fn run_chain(
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    hyper: ModelHyperparams,
    config: SamplerConfig,
    init: Option<ChainState>,
) -> Result<ChainOutput> {
    let mut chain = Chain::new(y, op, hyper, config, init)?;
    while !chain.is_done() {
        chain.step()?;
    }
    Ok(chain.finish())
}

/// Runs `n_chains` chains on separate threads; chain `c` uses stream
/// `config.stream + c`.
pub fn run_chains(
    y: &ImageGrid,
    op: &CyclicBlurOperator,
    hyper: ModelHyperparams,
    config: &SamplerConfig,
    n_chains: usize,
) -> Result<Vec<ChainOutput>> {
    if n_chains == 0 {
        return Err(Error::invalid("at least one chain is required"));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n_chains)
            .map(|c| {
                let mut cfg = config.clone();
                cfg.stream = config.stream + c as u64;
                scope.spawn(move || run_chain(y, op, hyper, cfg, None))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::numeric("chain thread panicked")))
            })
            .collect()
    })
}
