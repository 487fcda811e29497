//! Serializable run settings, recorded in `fit_meta.json`.

use serde::{Deserialize, Serialize};
use sudr_core::data::{synthesize, SyntheticDataset};
use sudr_core::hmc::{HmcConfig, MetricAdaptation};
use sudr_core::posterior::ModelKind;
use sudr_core::prior::PriorSpec;
use sudr_core::{ContagionFunction, EpidemicState, ModelParams, PopulationScaling};

use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::manifest::DEFAULT_ALPHA;

/// Prior scales and locations; `None` upper bounds mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub mu_theta: f64,
    pub mu_gamma: f64,
    pub mu_s0: f64,
    pub mu_iu0: f64,
    pub mu_id0: f64,
    pub theta_max: Option<f64>,
    pub gamma_max: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorSpec::default().into()
    }
}

impl From<PriorSpec> for PriorConfig {
    fn from(p: PriorSpec) -> Self {
        let bound = |x: f64| x.is_finite().then_some(x);
        Self {
            a: p.a,
            b: p.b,
            c: p.c,
            d: p.d,
            e: p.e,
            f: p.f,
            g: p.g,
            h: p.h,
            mu_theta: p.mu_theta,
            mu_gamma: p.mu_gamma,
            mu_s0: p.mu_s0,
            mu_iu0: p.mu_iu0,
            mu_id0: p.mu_id0,
            theta_max: bound(p.theta_max),
            gamma_max: bound(p.gamma_max),
        }
    }
}

impl From<PriorConfig> for PriorSpec {
    fn from(p: PriorConfig) -> Self {
        Self {
            a: p.a,
            b: p.b,
            c: p.c,
            d: p.d,
            e: p.e,
            f: p.f,
            g: p.g,
            h: p.h,
            mu_theta: p.mu_theta,
            mu_gamma: p.mu_gamma,
            mu_s0: p.mu_s0,
            mu_iu0: p.mu_iu0,
            mu_id0: p.mu_id0,
            theta_max: p.theta_max.unwrap_or(f64::INFINITY),
            gamma_max: p.gamma_max.unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adaptation {
    None,
    Diagonal,
    Dense,
}

impl From<Adaptation> for MetricAdaptation {
    fn from(a: Adaptation) -> Self {
        match a {
            Adaptation::None => MetricAdaptation::None,
            Adaptation::Diagonal => MetricAdaptation::Diagonal,
            Adaptation::Dense => MetricAdaptation::Dense,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub n_leapfrog: usize,
    pub step_jitter: f64,
    pub adaptation: Adaptation,
    pub mode_starts: usize,
    pub start_spread: f64,
    pub laplace_metric: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self {
            chains: fit.hmc.chains,
            iters: fit.hmc.iters,
            warmup: fit.hmc.warmup,
            target_accept: fit.hmc.target_accept,
            seed: fit.hmc.seed,
            n_leapfrog: fit.hmc.n_leapfrog,
            step_jitter: fit.hmc.step_jitter,
            adaptation: match fit.hmc.adaptation {
                MetricAdaptation::None => Adaptation::None,
                MetricAdaptation::Diagonal => Adaptation::Diagonal,
                MetricAdaptation::Dense => Adaptation::Dense,
            },
            mode_starts: fit.mode_starts,
            start_spread: fit.start_spread,
            laplace_metric: fit.laplace_metric,
        }
    }
}

impl SamplerConfig {
    pub fn hmc(&self) -> HmcConfig {
        HmcConfig {
            chains: self.chains,
            iters: self.iters,
            warmup: self.warmup,
            target_accept: self.target_accept,
            seed: self.seed,
            n_leapfrog: self.n_leapfrog,
            step_jitter: self.step_jitter,
            adaptation: self.adaptation.into(),
            initial_metric: None,
        }
    }

    pub fn fit_options(&self, kind: ModelKind, degree: usize, prior: PriorSpec) -> FitOptions {
        FitOptions {
            kind,
            degree,
            prior,
            hmc: self.hmc(),
            mode_starts: self.mode_starts,
            start_spread: self.start_spread,
            laplace_metric: self.laplace_metric,
        }
    }
}

/// Generating parameters of a synthetic SUDR dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub xi: Vec<f64>,
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub s0: f64,
    pub iu0: f64,
    pub id0: f64,
    pub days: usize,
    pub population: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            xi: vec![3.0, 1.0, 1.0],
            theta: 0.8,
            gamma: 1.0,
            sigma: 5e-4,
            s0: 0.7,
            iu0: 3e-4,
            id0: 2e-4,
            days: 60,
            population: 1e7,
            alpha: DEFAULT_ALPHA,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn truth(&self) -> Result<ModelParams> {
        let f = ContagionFunction::new(self.xi.clone())?;
        let y0 = EpidemicState::new(self.s0, self.iu0, self.id0, 0.0);
        Ok(ModelParams::new(f, self.theta, self.gamma, self.sigma, y0)?)
    }

    pub fn scaling(&self) -> Result<PopulationScaling> {
        Ok(PopulationScaling::new(self.population, self.alpha)?)
    }

    pub fn generate(&self) -> Result<SyntheticDataset> {
        if self.days < 2 {
            return Err(Error::Config("synthetic data needs at least 2 days".into()));
        }
        Ok(synthesize(&self.truth()?, self.days, self.scaling()?, self.seed)?)
    }
}

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Source {
    Country {
        name: String,
        population: f64,
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: Source,
    pub degree: usize,
    pub alpha: f64,
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
}

impl RunConfig {
    pub fn fit_options(&self) -> FitOptions {
        self.sampler.fit_options(ModelKind::Sudr, self.degree, self.prior.into())
    }
}
