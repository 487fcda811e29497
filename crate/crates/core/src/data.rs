//! Observation series, count-to-prevalence conversion, sparsity masking and
//! synthetic ground-truth datasets.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ode::{integrate_with, sudr_field, DEFAULT_SUBSTEPS};
use crate::state::{ModelParams, PopulationScaling};
use crate::{CoreError, Result};

/// Daily documented prevalence `Y_1..Y_T`; `None` marks a missing report.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    values: Vec<Option<f64>>,
    scaling: PopulationScaling,
    origin: String,
}

impl ObservationSeries {
    pub fn new(values: Vec<Option<f64>>, scaling: PopulationScaling, origin: impl Into<String>) -> Result<Self> {
        for (index, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !(*v >= 0.0 && *v <= 1.0) {
                    return Err(CoreError::InvalidParameter(alloc::format!(
                        "prevalence {v} at index {index} is outside [0, 1]"
                    )));
                }
            }
        }
        if values.iter().all(Option::is_none) {
            return Err(CoreError::InsufficientData("no observed value".into()));
        }
        Ok(Self { values, scaling, origin: origin.into() })
    }

    /// Fully observed series.
    pub fn complete(values: &[f64], scaling: PopulationScaling, origin: impl Into<String>) -> Result<Self> {
        Self::new(values.iter().copied().map(Some).collect(), scaling, origin)
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaling(&self) -> PopulationScaling {
        self.scaling
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn is_masked(&self, index: usize) -> bool {
        self.values[index].is_none()
    }

    /// `(index, value)` of every present observation.
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn max_observed(&self) -> f64 {
        self.observed().map(|(_, v)| v).fold(0.0, f64::max)
    }
}

/// Active documented counts with the days whose raw difference was negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveCounts {
    pub counts: Vec<u64>,
    /// Indices where `confirmed - recovered - deaths < 0` was floored to zero.
    pub floored: Vec<usize>,
}

/// `active = confirmed - recovered - deaths`, floored at zero.
pub fn active_counts(confirmed: &[u64], recovered: &[u64], deaths: &[u64]) -> Result<ActiveCounts> {
    if confirmed.len() != recovered.len() || confirmed.len() != deaths.len() {
        return Err(CoreError::InvalidParameter("count series differ in length".into()));
    }
    let mut floored = Vec::new();
    let counts = confirmed
        .iter()
        .zip(recovered)
        .zip(deaths)
        .enumerate()
        .map(|(i, ((c, r), d))| {
            let active = *c as i128 - *r as i128 - *d as i128;
            if active < 0 {
                floored.push(i);
                0
            } else {
                active as u64
            }
        })
        .collect();
    Ok(ActiveCounts { counts, floored })
}

/// Converts counts to densities of the involved subpopulation `P`.
pub fn to_prevalence(active: &[u64], scaling: PopulationScaling, origin: impl Into<String>) -> Result<ObservationSeries> {
    let values = counts_to_density(active, scaling)?;
    ObservationSeries::complete(&values, scaling, origin)
}

/// `count / P` for each entry, rejecting densities above 1.
pub fn counts_to_density(counts: &[u64], scaling: PopulationScaling) -> Result<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let value = *c as f64 / scaling.p();
            if value > 1.0 {
                Err(CoreError::PrevalenceOverflow { index, value })
            } else {
                Ok(value)
            }
        })
        .collect()
}

/// Number of days masked at a given sparsity level: `floor(fraction * T)`.
pub fn masked_day_count(fraction: f64, len: usize) -> usize {
    // the epsilon keeps products such as 0.29 * 100 from rounding down
    libm::floor(fraction * len as f64 + 1e-9) as usize
}

/// Masks `floor(fraction * T)` distinct days drawn uniformly from the
/// second day onward. The first day is never masked.
pub fn mask_sparsity(obs: &ObservationSeries, fraction: f64, seed: u64) -> Result<ObservationSeries> {
    if !(fraction >= 0.0 && fraction < 1.0) {
        return Err(CoreError::InvalidParameter(alloc::format!(
            "sparsity fraction {fraction} outside [0, 1)"
        )));
    }
    let len = obs.len();
    let count = masked_day_count(fraction, len).min(len.saturating_sub(1));
    let mut values = obs.values.clone();
    if count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for idx in rand::seq::index::sample(&mut rng, len - 1, count) {
            values[idx + 1] = None;
        }
    }
    ObservationSeries::new(values, obs.scaling, obs.origin.clone())
}

/// A dataset generated from known parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub truth: ModelParams,
    pub obs: ObservationSeries,
    pub seed: u64,
    /// Noise-free documented prevalence `i_d(t)`, `t = 1..=T`.
    pub mean_field: Vec<f64>,
    /// True undocumented density `i_u(t)`, `t = 1..=T`.
    pub undocumented: Vec<f64>,
    /// Cumulative documented removals, `gamma * integral of i_d`, `t = 1..=T`.
    /// This is the recovered-plus-deaths series a reporting system would see.
    pub documented_removed: Vec<f64>,
}

/// Generates `Y_t = i_d(t) + eps_t`, `eps_t ~ Normal(0, sigma)`, clamped to `[0, 1]`.
pub fn synthesize(truth: &ModelParams, days: usize, scaling: PopulationScaling, seed: u64) -> Result<SyntheticDataset> {
    truth.validate()?;
    let f = &truth.contagion;
    let (theta, gamma) = (truth.theta, truth.gamma);
    let y0 = truth.y0;
    let mut mean_field = Vec::with_capacity(days);
    let mut undocumented = Vec::with_capacity(days);
    let mut documented_removed = Vec::with_capacity(days);
    // SUDR plus a fifth component accumulating removals out of I^D.
    integrate_with(
        |y: &[f64; 5]| {
            let [s, i_u, i_d, r, _] = *y;
            let d = sudr_field(f, theta, gamma, &[s, i_u, i_d, r]);
            [d[0], d[1], d[2], d[3], gamma * i_d]
        },
        [y0.s, y0.i_u, y0.i_d, y0.r, 0.0],
        days,
        DEFAULT_SUBSTEPS,
        |t, y| {
            if t > 0 {
                undocumented.push(y[1]);
                mean_field.push(y[2]);
                documented_removed.push(y[4]);
            }
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = mean_field
        .iter()
        .map(|m| {
            let eps: f64 = rng.sample(StandardNormal);
            Some((m + truth.sigma * eps).clamp(0.0, 1.0))
        })
        .collect();
    let obs = ObservationSeries::new(values, scaling, alloc::format!("synthetic(seed={seed})"))?;
    Ok(SyntheticDataset {
        truth: truth.clone(),
        obs,
        seed,
        mean_field,
        undocumented,
        documented_removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ContagionFunction, EpidemicState};
    use alloc::vec;

    fn scaling() -> PopulationScaling {
        PopulationScaling::new(8_847_037.0, 0.01).unwrap()
    }

    #[test]
    fn active_counts_floor_and_flag() {
        let a = active_counts(&[10, 20], &[0, 5], &[0, 1]).unwrap();
        assert_eq!(a.counts, vec![10, 14]);
        assert!(a.floored.is_empty());
        let a = active_counts(&[5, 5], &[5, 6], &[0, 0]).unwrap();
        assert_eq!(a.counts, vec![0, 0]);
        assert_eq!(a.floored, vec![1]);
        assert!(active_counts(&[1], &[], &[]).is_err());
    }

    #[test]
    fn prevalence_division() {
        let obs = to_prevalence(&[884, 0], scaling(), "Austria").unwrap();
        let y = obs.values()[0].unwrap();
        assert!((y - 884.0 / 88_470.37).abs() < 1e-15);
        assert!((y - 0.009992).abs() < 1e-6);
        assert_eq!(obs.values()[1], Some(0.0));
        let err = to_prevalence(&[100_000], scaling(), "x").unwrap_err();
        assert!(matches!(err, CoreError::PrevalenceOverflow { index: 0, .. }));
    }

    #[test]
    fn halving_alpha_doubles_prevalence() {
        let full = PopulationScaling::new(1000.0, 1.0).unwrap();
        let half = PopulationScaling::new(1000.0, 0.5).unwrap();
        let a = counts_to_density(&[3, 7, 100], full).unwrap();
        let b = counts_to_density(&[3, 7, 100], half).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn observation_series_invariants() {
        assert!(ObservationSeries::new(vec![None, None], scaling(), "x").is_err());
        assert!(ObservationSeries::new(vec![Some(1.2)], scaling(), "x").is_err());
        assert!(ObservationSeries::new(vec![Some(-0.1)], scaling(), "x").is_err());
    }

    #[test]
    fn masking_counts_and_determinism() {
        let obs = ObservationSeries::complete(&[0.01; 60], scaling(), "x").unwrap();
        assert_eq!(mask_sparsity(&obs, 0.0, 1).unwrap(), obs);
        let m = mask_sparsity(&obs, 0.20, 42).unwrap();
        assert_eq!(m.len() - m.observed_count(), 12);
        assert!(!m.is_masked(0));
        assert_eq!(m, mask_sparsity(&obs, 0.20, 42).unwrap());
        assert_ne!(m, mask_sparsity(&obs, 0.20, 43).unwrap());
        assert!(mask_sparsity(&obs, 1.0, 1).is_err());
        assert_eq!(masked_day_count(0.05, 60), 3);
        assert_eq!(masked_day_count(0.10, 60), 6);
        assert_eq!(masked_day_count(0.29, 100), 29);
    }

    #[test]
    fn zero_noise_synthetic_equals_mean_field() {
        let f = ContagionFunction::new(vec![2.0, 3.0, 1.0]).unwrap();
        let truth = ModelParams::new(f, 0.8, 1.0, 0.0, EpidemicState::new(0.99, 0.005, 0.001, 0.0)).unwrap();
        let ds = synthesize(&truth, 30, scaling(), 3).unwrap();
        let expected = crate::ode::mean_field_prevalence(&truth, 30).unwrap();
        let got: Vec<f64> = ds.obs.values().iter().map(|v| v.unwrap()).collect();
        assert_eq!(got, expected);
        assert_eq!(ds.mean_field, expected);
    }
}
