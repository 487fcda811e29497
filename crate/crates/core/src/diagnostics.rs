//! Split-R-hat, effective sample size, quantiles and posterior summaries.

use alloc::string::String;
use alloc::vec::Vec;

use crate::hmc::ChainSet;
use crate::{CoreError, Result};

/// Largest acceptable R-hat for a converged run.
pub const RHAT_THRESHOLD: f64 = 1.05;
/// Smallest acceptable effective sample size for a converged run.
pub const ESS_THRESHOLD: f64 = 100.0;

fn check_chains(chains: &[Vec<f64>], min_len: usize) -> Result<usize> {
    if chains.len() < 2 {
        return Err(CoreError::InsufficientData(alloc::format!(
            "need at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(CoreError::InvalidParameter("chains differ in length".into()));
    }
    if n < min_len {
        return Err(CoreError::InsufficientData(alloc::format!(
            "need at least {min_len} draws per chain, got {n}"
        )));
    }
    Ok(n)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Potential scale reduction on chains split in half.
///
/// Zero within- and between-chain variance returns 1.0. Zero within-chain
/// variance with distinct chain values returns infinity.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains, 4)?;
    let half = n / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_variance(h)).sum::<f64>() / halves.len() as f64;
    let b = half as f64 * sample_variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (half as f64 - 1.0) / half as f64 * w + b / half as f64;
    Ok(libm::sqrt(var_plus / w))
}

/// Biased autocovariance of `xs` at `lag`.
fn autocovariance(xs: &[f64], m: f64, lag: usize) -> f64 {
    let n = xs.len();
    xs[..n - lag]
        .iter()
        .zip(&xs[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Effective sample size across all chains combined.
///
/// Autocorrelations are pooled over chains and summed in adjacent pairs
/// until the first negative pair. Constant draws report the chain length.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains, 4)?;
    let m = chains.len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    let w = mean(&vars);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + sample_variance(&means);
    if w == 0.0 || var_plus == 0.0 {
        return Ok(n as f64);
    }
    let rho = |lag: usize| -> f64 {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| autocovariance(c, *mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - acov) / var_plus
    };
    // rho(0) = 1 by construction of the pooled estimate; start there
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        // enforce a monotone sequence to damp noise in the tail
        pair = pair.min(prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / libm::log10(total));
    Ok(total / tau)
}

/// Linear-interpolation quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central 95% interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: mean(xs),
            lower: quantile_sorted(&sorted, 0.025),
            upper: quantile_sorted(&sorted, 0.975),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
    /// `None` when there are too few chains or draws to compute it.
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub params: Vec<ParamSummary>,
    pub divergences: usize,
    pub draws: usize,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn max_rhat(&self) -> Option<f64> {
        self.params.iter().filter_map(|p| p.rhat).reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.params.iter().filter_map(|p| p.ess).reduce(f64::min)
    }

    /// `max R-hat < 1.05` and `min ESS > 100`.
    pub fn converged(&self) -> bool {
        matches!(
            (self.max_rhat(), self.min_ess()),
            (Some(r), Some(e)) if r < RHAT_THRESHOLD && e > ESS_THRESHOLD
        )
    }
}

/// Summarizes one parameter from its per-chain draws.
pub fn summarize_param(name: &str, chains: &[Vec<f64>]) -> ParamSummary {
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = if pooled.is_empty() { f64::NAN } else { mean(&pooled) };
    let sd = libm::sqrt(sample_variance(&pooled));
    pooled.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.into(),
        mean: m,
        sd,
        q025: quantile_sorted(&pooled, 0.025),
        median: quantile_sorted(&pooled, 0.5),
        q975: quantile_sorted(&pooled, 0.975),
        rhat: split_rhat(chains).ok(),
        ess: ess(chains).ok(),
    }
}

/// Pooled post-warmup summary of every parameter.
pub fn summarize(set: &ChainSet) -> PosteriorSummary {
    let params = set
        .param_names
        .iter()
        .enumerate()
        .map(|(i, name)| summarize_param(name, &set.param_draws(i)))
        .collect();
    PosteriorSummary {
        params,
        divergences: set.divergences(),
        draws: set.chains.len() * set.draws_per_chain(),
    }
}
