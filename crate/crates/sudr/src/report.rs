//! Peak comparison between documented and undocumented infections, and
//! summaries of the sampled transmission rate.

use serde::{Deserialize, Serialize};
use sudr_core::diagnostics::quantile;

use crate::artifacts::{daily_densities, LoadedFit};
use crate::config::Source;
use crate::error::Result;

/// Mean and 95% interval over posterior draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lower: quantile(values, 0.025),
            upper: quantile(values, 0.975),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub country: String,
    pub population: f64,
    pub period: String,
    /// Largest observed active documented count.
    pub peak_documented: u64,
    /// Peak undocumented count, `max_t i_u(t) * P` per draw.
    pub peak_undocumented: Estimate,
    /// Per-draw ratio of the undocumented peak to the documented peak.
    pub ratio: Option<Estimate>,
    /// The documented peak is 0, so the ratio is undefined.
    pub ratio_undefined: bool,
    /// The documented series or most undocumented draws peak on the last
    /// day, so the window maximum stands in for the peak.
    pub still_rising: bool,
}

fn period(fit: &LoadedFit) -> String {
    match (&fit.meta.config.source, fit.records.first(), fit.records.last()) {
        (Source::Country { start, end, .. }, _, _) => format!("{start}..{end}"),
        (_, Some(first), Some(last)) => format!("{}..{}", first.date, last.date),
        _ => String::new(),
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

pub fn peak_report(fit: &LoadedFit) -> Result<PeakReport> {
    let p = fit.meta.scaling()?.p();
    let days = fit.obs.len();
    let observed: Vec<(usize, u64)> = fit
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.masked)
        .map(|(i, r)| (i, r.active))
        .collect();
    let (doc_day, peak_documented) = observed
        .iter()
        .fold((0, 0), |best, &(i, a)| if a > best.1 { (i, a) } else { best });
    let mut peaks = Vec::with_capacity(fit.draws.len());
    let mut rising = 0usize;
    for draw in &fit.draws {
        let (iu, _) = daily_densities(draw, days)?;
        if argmax(&iu) + 1 == days {
            rising += 1;
        }
        peaks.push(iu.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * p);
    }
    let last_observed = observed.last().map_or(0, |o| o.0);
    let still_rising = (peak_documented > 0 && doc_day == last_observed) || 2 * rising > fit.draws.len();
    let ratio = (peak_documented > 0).then(|| {
        let ratios: Vec<f64> = peaks.iter().map(|v| v / peak_documented as f64).collect();
        Estimate::from_samples(&ratios)
    });
    Ok(PeakReport {
        country: fit.records.first().map_or_else(String::new, |r| r.country.clone()),
        population: fit.meta.population,
        period: period(fit),
        peak_documented,
        peak_undocumented: Estimate::from_samples(&peaks),
        ratio_undefined: ratio.is_none(),
        ratio,
        still_rising,
    })
}

/// Flat CSV row matching the columns of the peak table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub country: String,
    pub population: f64,
    pub period: String,
    pub peak_documented: u64,
    pub peak_undocumented_mean: f64,
    pub peak_undocumented_lower: f64,
    pub peak_undocumented_upper: f64,
    pub ratio_mean: Option<f64>,
    pub ratio_lower: Option<f64>,
    pub ratio_upper: Option<f64>,
    pub ratio_undefined: bool,
    pub still_rising: bool,
}

impl From<&PeakReport> for PeakRow {
    fn from(r: &PeakReport) -> Self {
        Self {
            country: r.country.clone(),
            population: r.population,
            period: r.period.clone(),
            peak_documented: r.peak_documented,
            peak_undocumented_mean: r.peak_undocumented.mean,
            peak_undocumented_lower: r.peak_undocumented.lower,
            peak_undocumented_upper: r.peak_undocumented.upper,
            ratio_mean: r.ratio.map(|e| e.mean),
            ratio_lower: r.ratio.map(|e| e.lower),
            ratio_upper: r.ratio.map(|e| e.upper),
            ratio_undefined: r.ratio_undefined,
            still_rising: r.still_rising,
        }
    }
}

/// Five-number summary of `beta(i_u(t))` pooled over draws and days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub country: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// `(max - min) / median`.
    pub relative_spread: f64,
    pub values: usize,
}

/// Spread below this fraction of the median counts as a constant rate.
pub const CONSTANT_BETA_SPREAD: f64 = 0.1;

impl BetaReport {
    pub fn is_constant(&self) -> bool {
        self.relative_spread <= CONSTANT_BETA_SPREAD
    }
}

pub fn beta_report(fit: &LoadedFit) -> Result<BetaReport> {
    let days = fit.obs.len();
    let mut values = Vec::with_capacity(fit.draws.len() * days);
    for draw in &fit.draws {
        let (iu, _) = daily_densities(draw, days)?;
        values.extend(iu.iter().map(|&x| draw.contagion.eval_clamped(x)));
    }
    values.sort_by(f64::total_cmp);
    let q = |p| sudr_core::diagnostics::quantile_sorted(&values, p);
    let (min, max, median) = (values[0], values[values.len() - 1], q(0.5));
    Ok(BetaReport {
        country: fit.records.first().map_or_else(String::new, |r| r.country.clone()),
        min,
        q1: q(0.25),
        median,
        q3: q(0.75),
        max,
        relative_spread: if median > 0.0 { (max - min) / median } else { f64::INFINITY },
        values: values.len(),
    })
}
