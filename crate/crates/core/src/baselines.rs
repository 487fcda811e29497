//! Comparison models for the robustness study: constant-rate SIR,
//! time-dependent SIR with ridge-regressed rates, complex SIR, plus the
//! backtesting procedure shared with SUDR.
//!
//! The deterministic baselines work on the documented series only:
//! `I_t` is the documented prevalence, `R_t` the documented removals and
//! `S_t = 1 - I_t - R_t`. A masked prevalence day masks both.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::ObservationSeries;
use crate::ode::{integrate_with, sudr_field, DEFAULT_SUBSTEPS};
use crate::state::{ModelParams, SirState};
use crate::{CoreError, Result};

/// Densities outside this range abort a discrete baseline run.
pub const SIR_DENSITY_RANGE: (f64, f64) = (-0.1, 1.1);
pub const DEFAULT_LAG: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 0.03;

/// Per-day rates from the discrete SIR balance; `None` where a day pair is
/// masked or the denominator vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub beta: Vec<Option<f64>>,
    pub gamma: Vec<Option<f64>>,
}

impl RateSeries {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    fn present(xs: &[Option<f64>]) -> impl Iterator<Item = f64> + '_ {
        xs.iter().filter_map(|x| *x)
    }

    pub fn mean_beta(&self) -> Option<f64> {
        mean_of(Self::present(&self.beta))
    }

    pub fn mean_gamma(&self) -> Option<f64> {
        mean_of(Self::present(&self.gamma))
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn sir_point(obs: &ObservationSeries, removed: &[f64], t: usize) -> Option<SirState> {
    obs.values()[t].map(|i| SirState::new(1.0 - i - removed[t], i, removed[t]))
}

fn check_removed(obs: &ObservationSeries, removed: &[f64]) -> Result<()> {
    if removed.len() != obs.len() {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "removed series has {} days, prevalence has {}",
            removed.len(),
            obs.len()
        )));
    }
    if removed.iter().any(|r| !r.is_finite()) {
        return Err(CoreError::NonFinite("removed series".into()));
    }
    Ok(())
}

/// `beta_t = -(S_{t+1} - S_t) / (S_t I_t)` and `gamma_t = (R_{t+1} - R_t) / I_t`
/// for each pair of consecutive present days.
pub fn estimate_rate_series(obs: &ObservationSeries, removed: &[f64]) -> Result<RateSeries> {
    check_removed(obs, removed)?;
    let n = obs.len().saturating_sub(1);
    let mut beta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut pairs = 0;
    for t in 0..n {
        let (b, g) = match (sir_point(obs, removed, t), sir_point(obs, removed, t + 1)) {
            (Some(a), Some(b)) => {
                pairs += 1;
                let si = a.s * a.i;
                (
                    (si != 0.0).then(|| -(b.s - a.s) / si),
                    (a.i != 0.0).then(|| (b.r - a.r) / a.i),
                )
            }
            _ => (None, None),
        };
        beta.push(b);
        gamma.push(g);
    }
    if pairs == 0 {
        return Err(CoreError::InsufficientData(
            "no pair of consecutive observed days".into(),
        ));
    }
    Ok(RateSeries { beta, gamma })
}

/// Constant rates: the means of the per-day balance rates.
pub fn fit_constant_sir(obs: &ObservationSeries, removed: &[f64]) -> Result<(f64, f64)> {
    if obs.observed_count() < 3 {
        return Err(CoreError::InsufficientData(alloc::format!(
            "constant SIR needs 3 observed days, got {}",
            obs.observed_count()
        )));
    }
    let rates = estimate_rate_series(obs, removed)?;
    match (rates.mean_beta(), rates.mean_gamma()) {
        (Some(b), Some(g)) => Ok((b, g)),
        _ => Err(CoreError::InsufficientData(
            "every day pair has a zero denominator".into(),
        )),
    }
}

fn check_density(t: usize, s: &SirState) -> Result<()> {
    let (lo, hi) = SIR_DENSITY_RANGE;
    for v in [s.s, s.i, s.r] {
        if !(v >= lo && v <= hi) {
            return Err(CoreError::Blowup {
                day: t,
                detail: alloc::format!("density {v} left [{lo}, {hi}]"),
            });
        }
    }
    Ok(())
}

fn sir_step(y: &SirState, beta: f64, gamma: f64) -> SirState {
    let infections = beta * y.s * y.i;
    let removals = gamma * y.i;
    SirState::new(y.s - infections, y.i + infections - removals, y.r + removals)
}

/// Daily discrete SIR with constant rates; returns `horizon + 1` states.
pub fn discrete_sir(beta: f64, gamma: f64, y0: SirState, horizon: usize) -> Result<Vec<SirState>> {
    discrete_sir_with(|_| (beta, gamma), y0, horizon)
}

fn discrete_sir_with<F>(mut rates: F, y0: SirState, horizon: usize) -> Result<Vec<SirState>>
where
    F: FnMut(usize) -> (f64, f64),
{
    check_density(0, &y0)?;
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(y0);
    let mut y = y0;
    for t in 0..horizon {
        let (b, g) = rates(t);
        y = sir_step(&y, b, g);
        check_density(t + 1, &y)?;
        out.push(y);
    }
    Ok(out)
}

/// Ridge autoregression of order `lag` on a fully observed series.
///
/// Minimizes `sum (y_t - c_0 - sum_j c_j y_{t-j})^2 + lambda * |c_1..c_J|^2`;
/// returns `[c_0, c_1, .., c_J]`.
pub fn ridge_fit(series: &[f64], lag: usize, lambda: f64) -> Result<Vec<f64>> {
    if series.len() <= lag + 1 {
        return Err(CoreError::InsufficientData(alloc::format!(
            "ridge of lag {lag} needs more than {} points, got {}",
            lag + 1,
            series.len()
        )));
    }
    let wrapped: Vec<Option<f64>> = series.iter().copied().map(Some).collect();
    ridge_fit_sparse(&wrapped, lag, lambda)
}

/// As [`ridge_fit`], using only rows whose target and lags are all present.
pub fn ridge_fit_sparse(series: &[Option<f64>], lag: usize, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CoreError::InvalidParameter(alloc::format!("ridge lambda {lambda}")));
    }
    let k = lag + 1;
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    let mut rows = 0usize;
    let mut x = alloc::vec![0.0; k];
    for t in lag..series.len() {
        let Some(y) = series[t] else { continue };
        x[0] = 1.0;
        let mut complete = true;
        for j in 1..=lag {
            match series[t - j] {
                Some(v) => x[j] = v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        rows += 1;
        for a in 0..k {
            xty[a] += x[a] * y;
            for b in 0..k {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    if rows == 0 {
        return Err(CoreError::InsufficientData("no complete regression row".into()));
    }
    for j in 1..k {
        xtx[(j, j)] += lambda;
    }
    if lambda == 0.0 {
        let scale = xtx.amax().max(f64::MIN_POSITIVE);
        if xtx.clone().svd(false, false).rank(scale * 1e-12) < k {
            return Err(CoreError::Singular);
        }
    }
    let c = xtx.lu().solve(&xty).ok_or(CoreError::Singular)?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Singular);
    }
    Ok(c.iter().copied().collect())
}

/// Autoregressive models for the transmission and removal rates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentSir {
    pub lag: usize,
    pub lambda: f64,
    pub beta_coeffs: Vec<f64>,
    pub gamma_coeffs: Vec<f64>,
}

impl TimeDependentSir {
    pub fn fit(rates: &RateSeries, lag: usize, lambda: f64) -> Result<Self> {
        Ok(Self {
            lag,
            lambda,
            beta_coeffs: ridge_fit_sparse(&rates.beta, lag, lambda)?,
            gamma_coeffs: ridge_fit_sparse(&rates.gamma, lag, lambda)?,
        })
    }
}

/// Rate path: observed rates for the first `lag` days, one-step
/// autoregressive forecasts afterwards. Forecasts condition on the observed
/// rate where one exists and on earlier forecasts otherwise.
fn rate_path(observed: &[Option<f64>], coeffs: &[f64], horizon: usize) -> Vec<f64> {
    let lag = coeffs.len() - 1;
    let fallback = mean_of(observed.iter().filter_map(|x| *x)).unwrap_or(0.0);
    let mut history: Vec<f64> = Vec::with_capacity(horizon);
    let mut path = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let seen = observed.get(t).copied().flatten();
        let forecast = if t < lag {
            seen.unwrap_or(fallback)
        } else {
            let ar: f64 = (1..=lag).map(|j| coeffs[j] * history[t - j]).sum();
            (coeffs[0] + ar).max(0.0)
        };
        path.push(forecast);
        history.push(seen.unwrap_or(forecast));
    }
    path
}

/// Steps the discrete SIR forward with autoregressively extrapolated rates.
pub fn predict_time_dependent_sir(
    rates: &RateSeries,
    model: &TimeDependentSir,
    y0: SirState,
    horizon: usize,
) -> Result<Vec<SirState>> {
    if rates.is_empty() {
        return Err(CoreError::InsufficientData("empty rate series".into()));
    }
    let beta = rate_path(&rates.beta, &model.beta_coeffs, horizon);
    let gamma = rate_path(&rates.gamma, &model.gamma_coeffs, horizon);
    discrete_sir_with(|t| (beta[t], gamma[t]), y0, horizon)
}

/// A fitted model ready for backtesting, with its own initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    ConstantSir { beta: f64, gamma: f64, y0: SirState },
    TimeDependentSir { model: TimeDependentSir, rates: RateSeries, y0: SirState },
    /// Posterior-mean parameters; `theta` and `I^D_0` are ignored.
    ComplexSir(ModelParams),
    /// Posterior-mean parameters.
    Sudr(ModelParams),
}

impl FittedModel {
    /// Model-implied observed density aligned with the observation indices.
    pub fn predict(&self, days: usize) -> Result<Vec<f64>> {
        match self {
            FittedModel::ConstantSir { beta, gamma, y0 } => {
                let path = discrete_sir(*beta, *gamma, *y0, days.saturating_sub(1))?;
                Ok(path.into_iter().take(days).map(|s| s.i).collect())
            }
            FittedModel::TimeDependentSir { model, rates, y0 } => {
                let path = predict_time_dependent_sir(rates, model, *y0, days.saturating_sub(1))?;
                Ok(path.into_iter().take(days).map(|s| s.i).collect())
            }
            FittedModel::ComplexSir(p) => continuous_prediction(p, 0.0, 0.0, 1, days),
            FittedModel::Sudr(p) => continuous_prediction(p, p.theta, p.y0.i_d, 2, days),
        }
    }
}

fn continuous_prediction(p: &ModelParams, theta: f64, i_d0: f64, component: usize, days: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(days);
    integrate_with(
        |y| sudr_field(&p.contagion, theta, p.gamma, y),
        [p.y0.s, p.y0.i_u, i_d0, p.y0.r],
        days,
        DEFAULT_SUBSTEPS,
        |t, y| {
            if t > 0 {
                out.push(y[component]);
            }
        },
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub model_name: String,
    pub predicted: Vec<f64>,
    pub observed: Vec<Option<f64>>,
    pub rmse: f64,
    /// Set when no day beyond the anchor was observed; `rmse` is then 0.
    pub empty_evaluation: bool,
}

/// Root-mean-square error over present observations, skipping index 0.
/// Returns `None` when nothing is left to compare.
pub fn rmse(predicted: &[f64], observed: &[Option<f64>]) -> Option<f64> {
    let (sum, n) = predicted
        .iter()
        .zip(observed)
        .skip(1)
        .filter_map(|(p, o)| o.map(|o| (p - o) * (p - o)))
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    (n > 0).then(|| libm::sqrt(sum / n as f64))
}

/// Runs the model over the whole window and scores it on unmasked days.
///
/// Day index 0 anchors the deterministic baselines, so it never counts.
pub fn backtest(model_name: &str, model: &FittedModel, obs: &ObservationSeries) -> Result<BacktestResult> {
    let predicted = model.predict(obs.len())?;
    let observed = obs.values().to_vec();
    let score = rmse(&predicted, &observed);
    Ok(BacktestResult {
        model_name: model_name.into(),
        rmse: score.unwrap_or(0.0),
        empty_evaluation: score.is_none(),
        predicted,
        observed,
    })
}

/// Observed state on day index 0, the starting point of the discrete baselines.
pub fn sir_anchor(obs: &ObservationSeries, removed: &[f64]) -> Result<SirState> {
    check_removed(obs, removed)?;
    sir_point(obs, removed, 0)
        .ok_or_else(|| CoreError::InsufficientData("first day is masked".into()))
}
