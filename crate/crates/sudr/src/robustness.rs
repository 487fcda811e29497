//! Backtest comparison of the four models under increasing sparsity.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sudr_core::baselines::{
    backtest, estimate_rate_series, fit_constant_sir, sir_anchor, BacktestResult, FittedModel, TimeDependentSir,
    DEFAULT_LAG, DEFAULT_LAMBDA,
};
use sudr_core::data::{mask_sparsity, ObservationSeries};
use sudr_core::posterior::ModelKind;
use sudr_core::prior::PriorSpec;

use crate::config::SamplerConfig;
use crate::error::{Error, Result};
use crate::fit::fit_posterior;

pub const SPARSITY_LEVELS: [f64; 4] = [0.0, 0.05, 0.10, 0.20];
pub const MIN_DAYS: usize = 30;

pub const MODELS: [&str; 4] = ["sir", "time-dependent-sir", "complex-sir", "sudr"];

/// Documented prevalence and documented removed density on the same days.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessData {
    pub obs: ObservationSeries,
    pub removed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessOptions {
    pub levels: Vec<f64>,
    pub degree: usize,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub lag: usize,
    pub lambda: f64,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            levels: SPARSITY_LEVELS.to_vec(),
            degree: 8,
            prior: PriorSpec::default(),
            sampler: SamplerConfig::default(),
            lag: DEFAULT_LAG,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Outcome of one model at one sparsity level and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model: String,
    pub sparsity: f64,
    pub seed: u64,
    pub result: std::result::Result<BacktestResult, String>,
}

/// Fits every model on `data` masked at `sparsity` with `seed`.
pub fn run_level(data: &RobustnessData, sparsity: f64, seed: u64, options: &RobustnessOptions) -> Vec<ModelRun> {
    let run = |model: &str, result: Result<BacktestResult>| ModelRun {
        model: model.to_string(),
        sparsity,
        seed,
        result: result.map_err(|e| e.to_string()),
    };
    let masked = match mask_sparsity(&data.obs, sparsity, seed) {
        Ok(m) => m,
        Err(e) => {
            let msg = e.to_string();
            return MODELS
                .iter()
                .map(|m| ModelRun {
                    model: m.to_string(),
                    sparsity,
                    seed,
                    result: Err(msg.clone()),
                })
                .collect();
        }
    };
    let removed = &data.removed;
    let constant = || -> Result<BacktestResult> {
        let (beta, gamma) = fit_constant_sir(&masked, removed)?;
        let y0 = sir_anchor(&masked, removed)?;
        Ok(backtest(MODELS[0], &FittedModel::ConstantSir { beta, gamma, y0 }, &masked)?)
    };
    let time_dependent = || -> Result<BacktestResult> {
        let rates = estimate_rate_series(&masked, removed)?;
        let model = TimeDependentSir::fit(&rates, options.lag, options.lambda)?;
        let y0 = sir_anchor(&masked, removed)?;
        Ok(backtest(MODELS[1], &FittedModel::TimeDependentSir { model, rates, y0 }, &masked)?)
    };
    let bayesian = |kind: ModelKind, name: &str| -> Result<BacktestResult> {
        let mut sampler = options.sampler.clone();
        sampler.seed = seed;
        let fit = fit_posterior(&masked, &sampler.fit_options(kind, options.degree, options.prior))?;
        let mean = fit.posterior_mean()?;
        let model = match kind {
            ModelKind::Sudr => FittedModel::Sudr(mean),
            ModelKind::ComplexSir => FittedModel::ComplexSir(mean),
        };
        Ok(backtest(name, &model, &masked)?)
    };
    vec![
        run(MODELS[0], constant()),
        run(MODELS[1], time_dependent()),
        run(MODELS[2], bayesian(ModelKind::ComplexSir, MODELS[2])),
        run(MODELS[3], bayesian(ModelKind::Sudr, MODELS[3])),
    ]
}

/// Runs every level for every `(seed, data)` pair on the worker pool.
pub fn run_robustness(datasets: &[(u64, RobustnessData)], options: &RobustnessOptions) -> Result<Vec<ModelRun>> {
    for (_, data) in datasets {
        if data.obs.len() < MIN_DAYS {
            return Err(Error::Config(format!(
                "robustness analysis needs at least {MIN_DAYS} days, got {}",
                data.obs.len()
            )));
        }
        if data.removed.len() != data.obs.len() {
            return Err(Error::Config("removed series length differs from prevalence".into()));
        }
    }
    let jobs: Vec<(f64, u64, &RobustnessData)> = options
        .levels
        .iter()
        .flat_map(|&level| datasets.iter().map(move |(seed, data)| (level, *seed, data)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|(level, seed, data)| run_level(data, *level, *seed, options))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Mean RMSE over seeds per model and level, failed runs excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub sparsity: f64,
    pub mean_rmse: BTreeMap<String, Option<f64>>,
    pub runs: BTreeMap<String, usize>,
    pub failures: BTreeMap<String, usize>,
}

pub fn summarize_runs(runs: &[ModelRun], levels: &[f64]) -> Vec<LevelSummary> {
    levels
        .iter()
        .map(|&level| {
            let mut mean_rmse = BTreeMap::new();
            let mut counts = BTreeMap::new();
            let mut failures = BTreeMap::new();
            for model in MODELS {
                let at: Vec<_> = runs.iter().filter(|r| r.sparsity == level && r.model == model).collect();
                let ok: Vec<f64> = at.iter().filter_map(|r| r.result.as_ref().ok().map(|b| b.rmse)).collect();
                let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
                mean_rmse.insert(model.to_string(), mean);
                counts.insert(model.to_string(), at.len());
                failures.insert(model.to_string(), at.len() - ok.len());
            }
            LevelSummary {
                sparsity: level,
                mean_rmse,
                runs: counts,
                failures,
            }
        })
        .collect()
}

/// One row of `robustness_runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub sparsity: f64,
    pub seed: u64,
    pub rmse: Option<f64>,
    pub empty_evaluation: bool,
    pub error: Option<String>,
}

impl From<&ModelRun> for RunRecord {
    fn from(r: &ModelRun) -> Self {
        Self {
            model: r.model.clone(),
            sparsity: r.sparsity,
            seed: r.seed,
            rmse: r.result.as_ref().ok().map(|b| b.rmse),
            empty_evaluation: r.result.as_ref().is_ok_and(|b| b.empty_evaluation),
            error: r.result.as_ref().err().cloned(),
        }
    }
}

/// Rows `day, observed, predicted_<model>...` for one level and seed.
pub fn backtest_table(runs: &[&ModelRun]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["day".to_string(), "observed".to_string()];
    let ok: Vec<&BacktestResult> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    header.extend(ok.iter().map(|b| format!("predicted_{}", b.model_name)));
    let days = ok.first().map_or(0, |b| b.observed.len());
    let rows = (0..days)
        .map(|t| {
            let mut row = vec![(t + 1).to_string(), ok[0].observed[t].map_or(String::new(), |v| v.to_string())];
            row.extend(ok.iter().map(|b| b.predicted[t].to_string()));
            row
        })
        .collect();
    (header, rows)
}
