//! Posterior fitting: mode search, chain initialization and parallel HMC.

use std::thread;

use sudr_core::data::ObservationSeries;
use sudr_core::diagnostics::{summarize, PosteriorSummary};
use sudr_core::hmc::{run_chain, ChainSet, HmcConfig, LogDensity, MassMatrix};
use sudr_core::posterior::{ModelKind, ParamLayout, Posterior};
use sudr_core::prior::PriorSpec;
use sudr_core::ModelParams;

use crate::error::{Error, Result};
use crate::mode::{find_mode, laplace_covariance, Mode};

/// Settings of one posterior fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub kind: ModelKind,
    pub degree: usize,
    pub prior: PriorSpec,
    pub hmc: HmcConfig,
    /// Random restarts of the mode search.
    pub mode_starts: usize,
    /// Chain starting points are spread over `+- start_spread` Laplace
    /// standard deviations around the mode.
    pub start_spread: f64,
    /// Use the Laplace covariance at the mode as the initial mass matrix.
    pub laplace_metric: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kind: ModelKind::Sudr,
            degree: 8,
            prior: PriorSpec::default(),
            // curvature changes along the posterior ridge; at 0.8 some chains
            // end warmup with a step too long for the stiffer stretches
            hmc: HmcConfig {
                target_accept: 0.9,
                ..HmcConfig::default()
            },
            mode_starts: 10,
            start_spread: 0.2,
            laplace_metric: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub layout: ParamLayout,
    pub chains: ChainSet,
    pub summary: PosteriorSummary,
    pub mode: Mode,
}

impl Fit {
    /// Posterior-mean parameters.
    pub fn posterior_mean(&self) -> Result<ModelParams> {
        Ok(self.layout.posterior_mean(&self.chains)?)
    }

    /// Every pooled draw as model parameters.
    pub fn draws(&self) -> Result<Vec<ModelParams>> {
        self.chains
            .pooled_draws()
            .map(|d| self.layout.params_from_constrained(d).map_err(Error::from))
            .collect()
    }
}

/// Runs the chains on scoped threads; results match a sequential run.
pub fn sample_parallel<T: LogDensity + Sync + ?Sized>(target: &T, config: &HmcConfig) -> Result<ChainSet> {
    config.validate()?;
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|c| scope.spawn(move || run_chain(target, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ChainSet::new(chains, config.warmup, config.seed, target.param_names())?)
}

/// Mode search, Laplace preconditioning, then HMC.
pub fn fit_posterior(obs: &ObservationSeries, options: &FitOptions) -> Result<Fit> {
    let post = Posterior::new(obs, options.prior, options.kind, options.degree)?;
    let mode = find_mode(&post, options.mode_starts, 1.0, options.hmc.seed)?;
    let dim = post.dim();
    let cov = laplace_covariance(&post, &mode.position)?;
    let sd: Vec<f64> = (0..dim).map(|i| cov[i * dim + i].sqrt()).collect();
    let spread = sd.iter().map(|s| options.start_spread * s).collect();
    let post = post.with_start(mode.position.clone(), spread);
    let mut config = options.hmc.clone();
    if options.laplace_metric {
        config.initial_metric = Some(MassMatrix::dense(dim, &cov)?);
    }
    let chains = sample_parallel(&post, &config)?;
    let summary = summarize(&chains);
    Ok(Fit {
        layout: post.layout().clone(),
        chains,
        summary,
        mode,
    })
}
