//! Static-trajectory Hamiltonian Monte Carlo.
//!
//! Each iteration resamples the momentum, runs a fixed number of leapfrog
//! steps and applies a Metropolis correction on the Hamiltonian. The step
//! size is tuned during warmup by dual averaging towards a target
//! acceptance statistic. Chains are independent and seeded by
//! `(seed, chain index)`, so running them sequentially or in parallel gives
//! identical draws.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CoreError, Result};

/// Energy error beyond which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Relative finite-difference step: `h_i = FD_STEP * max(1, |z_i|)`.
pub const FD_STEP: f64 = 1e-5;

/// A differentiable log density on `R^n`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Log density up to a constant; `-inf` outside the support.
    fn log_density(&self, z: &[f64]) -> f64;

    /// Gradient of [`LogDensity::log_density`]; central differences unless overridden.
    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        central_gradient(|x| self.log_density(x), z)
    }

    /// Starting point for a chain. Defaults to `U(-2, 2)` per coordinate.
    fn initial_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    /// Names of the reported (constrained) parameters.
    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("z_{i}")).collect()
    }

    /// Maps an unconstrained position to the reported parameter vector.
    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        z.to_vec()
    }
}

/// Central finite differences with per-coordinate step `1e-5 * max(1, |z_i|)`.
pub fn central_gradient<F>(f: F, z: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work = z.to_vec();
    let mut grad = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let h = FD_STEP * z[i].abs().max(1.0);
        work[i] = z[i] + h;
        let up = f(&work);
        work[i] = z[i] - h;
        let down = f(&work);
        work[i] = z[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(CoreError::NonFinite(format!(
                "finite-difference probe of coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Position, momentum and the cached log density / gradient at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub gradient: Vec<f64>,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, position: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        let log_density = target.log_density(&position);
        if !log_density.is_finite() {
            return Err(CoreError::NonFinite("log density at phase point".into()));
        }
        let gradient = target.gradient(&position)?;
        Ok(Self { position, momentum, log_density, gradient })
    }

    /// `-log p(z) + p' M^{-1} p / 2`.
    pub fn hamiltonian(&self, metric: &MassMatrix) -> f64 {
        -self.log_density + metric.kinetic(&self.momentum)
    }
}

/// Mass matrix `M`, stored through its inverse.
#[derive(Debug, Clone, PartialEq)]
pub enum MassMatrix {
    /// Diagonal of `M^{-1}`.
    Diagonal(Vec<f64>),
    /// Dense `M^{-1}` with its lower Cholesky factor `L` (`M^{-1} = L L'`).
    Dense { inverse: DMatrix<f64>, factor: DMatrix<f64> },
}

impl MassMatrix {
    pub fn identity(dim: usize) -> Self {
        MassMatrix::Diagonal(vec![1.0; dim])
    }

    pub fn diagonal(inverse: Vec<f64>) -> Result<Self> {
        if inverse.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CoreError::InvalidParameter(
                "inverse metric entries must be positive and finite".into(),
            ));
        }
        Ok(MassMatrix::Diagonal(inverse))
    }

    /// Dense metric from a covariance-like `M^{-1}` given row by row.
    pub fn dense(dim: usize, inverse: &[f64]) -> Result<Self> {
        if inverse.len() != dim * dim || inverse.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "dense inverse metric needs {} finite entries",
                dim * dim
            )));
        }
        let m = DMatrix::from_row_slice(dim, dim, inverse);
        let m = (&m + m.transpose()) * 0.5;
        let factor = m
            .clone()
            .cholesky()
            .ok_or(CoreError::Singular)?
            .l();
        Ok(MassMatrix::Dense { inverse: m, factor })
    }

    pub fn dim(&self) -> usize {
        match self {
            MassMatrix::Diagonal(d) => d.len(),
            MassMatrix::Dense { inverse, .. } => inverse.nrows(),
        }
    }

    /// Diagonal of `M^{-1}`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        match self {
            MassMatrix::Diagonal(d) => d.clone(),
            MassMatrix::Dense { inverse, .. } => inverse.diagonal().iter().copied().collect(),
        }
    }

    /// `M^{-1} p`.
    pub fn velocity(&self, momentum: &[f64]) -> Vec<f64> {
        match self {
            MassMatrix::Diagonal(d) => momentum.iter().zip(d).map(|(p, m)| p * m).collect(),
            MassMatrix::Dense { inverse, .. } => {
                let n = inverse.nrows();
                (0..n)
                    .map(|i| (0..n).map(|j| inverse[(i, j)] * momentum[j]).sum())
                    .collect()
            }
        }
    }

    /// `p' M^{-1} p / 2`.
    pub fn kinetic(&self, momentum: &[f64]) -> f64 {
        match self {
            MassMatrix::Diagonal(d) => {
                0.5 * momentum.iter().zip(d).map(|(p, m)| p * p * m).sum::<f64>()
            }
            MassMatrix::Dense { .. } => {
                0.5 * momentum
                    .iter()
                    .zip(self.velocity(momentum))
                    .map(|(p, v)| p * v)
                    .sum::<f64>()
            }
        }
    }

    /// Draws `p ~ Normal(0, M)`.
    pub fn sample_momentum(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let normals: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        match self {
            MassMatrix::Diagonal(d) => normals.iter().zip(d).map(|(n, m)| n / sqrt(*m)).collect(),
            MassMatrix::Dense { factor, .. } => {
                // M = L'^{-1} L^{-1}, so p = L'^{-1} n has covariance M
                let n = DVector::from_vec(normals);
                let p = factor
                    .transpose()
                    .solve_upper_triangular(&n)
                    .expect("Cholesky factor has a positive diagonal");
                p.iter().copied().collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogOutcome {
    pub point: PhasePoint,
    pub divergent: bool,
    /// `H(end) - H(start)`; infinite when the trajectory left the support.
    pub energy_error: f64,
}

/// Runs `n_steps` velocity-Verlet steps from `(z, momentum)` with an identity mass matrix.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    z: &[f64],
    momentum: &[f64],
    step: f64,
    n_steps: usize,
) -> Result<LeapfrogOutcome> {
    let start = PhasePoint::new(target, z.to_vec(), momentum.to_vec())?;
    leapfrog_from(target, &start, step, n_steps, &MassMatrix::identity(z.len()))
}

/// Leapfrog integration from a point whose density and gradient are cached.
pub fn leapfrog_from<T: LogDensity + ?Sized>(
    target: &T,
    start: &PhasePoint,
    step: f64,
    n_steps: usize,
    metric: &MassMatrix,
) -> Result<LeapfrogOutcome> {
    if !(step > 0.0 && step.is_finite()) || n_steps == 0 {
        return Err(CoreError::InvalidParameter(format!(
            "leapfrog needs step > 0 and n_steps >= 1 (got {step}, {n_steps})"
        )));
    }
    let h0 = start.hamiltonian(metric);
    let mut z = start.position.clone();
    let mut p = start.momentum.clone();
    let mut grad = start.gradient.clone();
    let mut log_density = start.log_density;
    let diverged = |z: Vec<f64>, p: Vec<f64>, grad: Vec<f64>, lp: f64| LeapfrogOutcome {
        point: PhasePoint { position: z, momentum: p, log_density: lp, gradient: grad },
        divergent: true,
        energy_error: f64::INFINITY,
    };
    for _ in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * gi;
        }
        for (zi, vi) in z.iter_mut().zip(metric.velocity(&p)) {
            *zi += step * vi;
        }
        log_density = target.log_density(&z);
        if !log_density.is_finite() {
            return Ok(diverged(z, p, grad, f64::NEG_INFINITY));
        }
        grad = match target.gradient(&z) {
            Ok(g) => g,
            Err(_) => return Ok(diverged(z, p, grad, log_density)),
        };
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * gi;
        }
        let err = -log_density + metric.kinetic(&p) - h0;
        if !(err <= DIVERGENCE_THRESHOLD) {
            return Ok(diverged(z, p, grad, log_density));
        }
    }
    let point = PhasePoint { position: z, momentum: p, log_density, gradient: grad };
    let energy_error = point.hamiltonian(metric) - h0;
    Ok(LeapfrogOutcome { point, divergent: false, energy_error })
}

/// Dual-averaging step-size adaptation (Nesterov / Hoffman-Gelman).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    count: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        Self {
            mu: log(10.0 * initial_step),
            target: target_accept,
            h_bar: 0.0,
            log_step: log(initial_step),
            log_step_bar: 0.0,
            count: 0.0,
        }
    }

    /// Records one acceptance statistic; returns the step size for the next iteration.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.count += 1.0;
        let m = self.count;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        self.log_step = self.mu - sqrt(m) / Self::GAMMA * self.h_bar;
        let eta = libm::pow(m, -Self::KAPPA);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
        exp(self.log_step)
    }

    pub fn current(&self) -> f64 {
        exp(self.log_step)
    }

    /// Step size to freeze after warmup.
    pub fn adapted(&self) -> f64 {
        if self.count == 0.0 {
            self.current()
        } else {
            exp(self.log_step_bar)
        }
    }
}

/// How the mass matrix is tuned during warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricAdaptation {
    /// Keep the initial mass matrix.
    #[default]
    None,
    /// Re-estimate a diagonal inverse metric from warmup draws in doubling windows.
    Diagonal,
    /// Re-estimate a dense inverse metric from warmup draws in doubling windows.
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub iters: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub n_leapfrog: usize,
    /// Each iteration draws its step uniformly from `step * (1 ± jitter)`,
    /// which breaks the periodic orbits a fixed trajectory length can lock into.
    pub step_jitter: f64,
    pub adaptation: MetricAdaptation,
    /// Starting mass matrix; identity when `None`.
    pub initial_metric: Option<MassMatrix>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iters: 2000,
            warmup: 1000,
            target_accept: 0.8,
            seed: 0,
            n_leapfrog: 20,
            step_jitter: 0.2,
            adaptation: MetricAdaptation::None,
            initial_metric: None,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(CoreError::InvalidParameter("at least one chain is required".into()));
        }
        if !(self.iters > self.warmup && self.warmup >= 1) {
            return Err(CoreError::InvalidParameter(format!(
                "need iters > warmup >= 1 (iters = {}, warmup = {})",
                self.iters, self.warmup
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(CoreError::InvalidParameter("target_accept must lie in (0, 1)".into()));
        }
        if self.n_leapfrog == 0 {
            return Err(CoreError::InvalidParameter("n_leapfrog must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(CoreError::InvalidParameter("step_jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iters - self.warmup
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// Constrained parameter vectors, one per post-warmup iteration.
    pub draws: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
    pub stream: u64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn mean_accept(&self) -> f64 {
        if self.accept_stat.is_empty() {
            return 0.0;
        }
        self.accept_stat.iter().sum::<f64>() / self.accept_stat.len() as f64
    }
}

/// All chains of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub chains: Vec<Chain>,
    pub warmup: usize,
    pub seed: u64,
    pub param_names: Vec<String>,
}

impl ChainSet {
    pub fn new(chains: Vec<Chain>, warmup: usize, seed: u64, param_names: Vec<String>) -> Result<Self> {
        if let Some(first) = chains.first() {
            if chains.iter().any(|c| c.len() != first.len()) {
                return Err(CoreError::InvalidParameter("chains differ in length".into()));
            }
        }
        Ok(Self { chains, warmup, seed, param_names })
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, Chain::len)
    }

    /// Per-chain draws of one parameter.
    pub fn param_draws(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.draws.iter().map(|d| d[index]).collect())
            .collect()
    }

    /// All post-warmup draws of one parameter, chain by chain.
    pub fn pooled(&self, index: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.draws.iter().map(move |d| d[index]))
            .collect()
    }

    /// Every post-warmup draw in chain order.
    pub fn pooled_draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn divergences(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|d| **d).count())
            .sum()
    }
}

/// Runs `config.chains` chains one after another.
pub fn hmc_sample<T: LogDensity + ?Sized>(target: &T, config: &HmcConfig) -> Result<ChainSet> {
    config.validate()?;
    let chains = (0..config.chains)
        .map(|c| run_chain(target, config, c))
        .collect::<Result<Vec<_>>>()?;
    ChainSet::new(chains, config.warmup, config.seed, target.param_names())
}

pub fn chain_rng(seed: u64, chain_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_index as u64);
    rng
}

fn initial_position<T: LogDensity + ?Sized>(target: &T, rng: &mut ChaCha8Rng) -> Result<PhasePoint> {
    for _ in 0..100 {
        let z = target.initial_point(rng);
        let momentum = vec![0.0; z.len()];
        if let Ok(point) = PhasePoint::new(target, z, momentum) {
            return Ok(point);
        }
    }
    Err(CoreError::SamplerFailed(
        "no finite starting point found in 100 attempts".into(),
    ))
}

/// Doubles or halves the step until a single leapfrog step crosses
/// acceptance probability 1/2.
fn initial_step_size<T: LogDensity + ?Sized>(
    target: &T,
    point: &PhasePoint,
    metric: &MassMatrix,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut start = point.clone();
    start.momentum = metric.sample_momentum(rng);
    let log_accept = |step: f64| match leapfrog_from(target, &start, step, 1, metric) {
        Ok(out) if !out.divergent => -out.energy_error,
        _ => f64::NEG_INFINITY,
    };
    let mut step = 0.1;
    let half = -core::f64::consts::LN_2;
    let direction = if log_accept(step) > half { 1.0 } else { -1.0 };
    for _ in 0..60 {
        let la = log_accept(step);
        if (direction > 0.0 && !(la > half)) || (direction < 0.0 && la > half) {
            break;
        }
        step *= libm::pow(2.0, direction);
    }
    if direction > 0.0 {
        step * 0.5
    } else {
        step
    }
    .clamp(1e-8, 10.0)
}

/// Stan-style warmup windows: fast initial buffer, doubling slow windows,
/// fast terminal buffer. Returns the first slow iteration and the iteration
/// counts that close each slow window.
fn metric_windows(warmup: usize) -> (usize, Vec<usize>) {
    let (init, term, base) = if warmup >= 150 {
        (75, 50, 25)
    } else {
        let init = warmup * 15 / 100;
        let term = warmup / 10;
        (init, term, warmup - init - term)
    };
    let slow_end = warmup - term;
    let mut ends = Vec::new();
    let mut start = init;
    let mut size = base.max(1);
    while start < slow_end {
        let mut end = start + size;
        // fold a too-short trailing window into the current one
        if end + 2 * size > slow_end {
            end = slow_end;
        }
        ends.push(end);
        start = end;
        size *= 2;
    }
    (init, ends)
}

/// Runs one chain: warmup with step-size (and optionally metric) adaptation,
/// then `iters - warmup` stored iterations.
pub fn run_chain<T: LogDensity + ?Sized>(target: &T, config: &HmcConfig, chain_index: usize) -> Result<Chain> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain_index);
    let dim = target.dim();
    let mut metric = match &config.initial_metric {
        Some(m) if m.dim() == dim => m.clone(),
        Some(m) => {
            return Err(CoreError::InvalidParameter(format!(
                "initial metric has dimension {}, target has {dim}",
                m.dim()
            )))
        }
        None => MassMatrix::identity(dim),
    };
    let mut current = initial_position(target, &mut rng)?;
    let mut step = initial_step_size(target, &current, &metric, &mut rng);
    let mut adapter = DualAveraging::new(step, config.target_accept);

    let (window_start, window_ends) = match config.adaptation {
        MetricAdaptation::None => (usize::MAX, Vec::new()),
        MetricAdaptation::Diagonal | MetricAdaptation::Dense => metric_windows(config.warmup),
    };
    let mut window: Vec<Vec<f64>> = Vec::new();

    let keep = config.draws_per_chain();
    let mut chain = Chain {
        draws: Vec::with_capacity(keep),
        log_density: Vec::with_capacity(keep),
        divergent: Vec::with_capacity(keep),
        accept_stat: Vec::with_capacity(keep),
        step_size: step,
        inv_metric: Vec::new(),
        warmup_divergences: 0,
        stream: chain_index as u64,
    };

    for iter in 0..config.iters {
        current.momentum = metric.sample_momentum(&mut rng);
        let h0 = current.hamiltonian(&metric);
        let jitter: f64 = rng.random_range(-1.0..=1.0);
        let eps = step * (1.0 + config.step_jitter * jitter);
        let outcome = leapfrog_from(target, &current, eps, config.n_leapfrog, &metric)?;
        let accept_stat = if outcome.divergent {
            0.0
        } else {
            let h1 = outcome.point.hamiltonian(&metric);
            exp((h0 - h1).min(0.0))
        };
        let u: f64 = rng.random();
        if !outcome.divergent && u < accept_stat {
            current = outcome.point;
        }

        if iter < config.warmup {
            if outcome.divergent {
                chain.warmup_divergences += 1;
            }
            step = adapter.update(accept_stat);
            if iter >= window_start {
                window.push(current.position.clone());
            }
            if window_ends.contains(&(iter + 1)) {
                if let Some(estimate) = estimate_metric(&window, config.adaptation) {
                    metric = estimate;
                }
                window.clear();
                step = initial_step_size(target, &current, &metric, &mut rng);
                adapter = DualAveraging::new(step, config.target_accept);
            }
            if iter + 1 == config.warmup {
                step = adapter.adapted();
            }
        } else {
            chain.draws.push(target.constrain(&current.position));
            chain.log_density.push(current.log_density);
            chain.divergent.push(outcome.divergent);
            chain.accept_stat.push(accept_stat);
        }
    }
    chain.step_size = step;
    chain.inv_metric = metric.inverse_diagonal();

    if chain.divergent.iter().all(|d| *d) {
        return Err(CoreError::SamplerFailed(format!(
            "chain {chain_index}: every post-warmup iteration diverged"
        )));
    }
    let accept = chain.mean_accept();
    if accept < 0.1 {
        return Err(CoreError::SamplerFailed(format!(
            "chain {chain_index}: post-warmup acceptance {accept:.3} below 0.1"
        )));
    }
    Ok(chain)
}

/// Sample covariance of the window shrunk towards `1e-3 * I`.
fn estimate_metric(window: &[Vec<f64>], adaptation: MetricAdaptation) -> Option<MassMatrix> {
    let dim = window.first()?.len();
    if window.len() < 3 {
        return None;
    }
    let n = window.len() as f64;
    let means: Vec<f64> = (0..dim)
        .map(|j| window.iter().map(|w| w[j]).sum::<f64>() / n)
        .collect();
    let cov = |a: usize, b: usize| {
        window
            .iter()
            .map(|w| (w[a] - means[a]) * (w[b] - means[b]))
            .sum::<f64>()
            / (n - 1.0)
    };
    let shrink = n / (n + 5.0);
    let ridge = 1e-3 * (5.0 / (n + 5.0));
    match adaptation {
        MetricAdaptation::None => None,
        MetricAdaptation::Diagonal => {
            MassMatrix::diagonal((0..dim).map(|j| shrink * cov(j, j) + ridge).collect()).ok()
        }
        MetricAdaptation::Dense => {
            let mut m = vec![0.0; dim * dim];
            for a in 0..dim {
                for b in 0..dim {
                    m[a * dim + b] = shrink * cov(a, b) + if a == b { ridge } else { 0.0 };
                }
            }
            MassMatrix::dense(dim, &m).ok()
        }
    }
}
