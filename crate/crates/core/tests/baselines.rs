use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sudr_core::baselines::{
    backtest, discrete_sir, estimate_rate_series, fit_constant_sir, predict_time_dependent_sir, ridge_fit,
    sir_anchor, FittedModel, TimeDependentSir, DEFAULT_LAG, DEFAULT_LAMBDA,
};
use sudr_core::data::{mask_sparsity, synthesize, ObservationSeries};
use sudr_core::ode::{simulate_sir, DEFAULT_SUBSTEPS};
use sudr_core::{ContagionFunction, EpidemicState, ModelParams, PopulationScaling, SirState};

fn scaling() -> PopulationScaling {
    PopulationScaling::new(1e6, 0.01).unwrap()
}

/// Discrete SIR with a day-dependent transmission rate, optionally noisy.
fn sir_series(beta: impl Fn(usize) -> f64, gamma: f64, days: usize, noise: f64, seed: u64) -> (ObservationSeries, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = SirState::new(0.98, 0.02, 0.0);
    let (mut i, mut r) = (Vec::new(), Vec::new());
    for t in 0..days {
        let e: f64 = rng.sample(StandardNormal);
        i.push(y.i + noise * e);
        r.push(y.r);
        let new = beta(t) * y.s * y.i;
        y = SirState::new(y.s - new, y.i + new - gamma * y.i, y.r + gamma * y.i);
    }
    (ObservationSeries::complete(&i, scaling(), "sir").unwrap(), r)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[test]
fn ridge_matches_cramer_solution() {
    let series: Vec<f64> = (0..20).map(|t| 1.0 + 0.5 * (t as f64 * 0.7).sin() + 0.01 * t as f64).collect();
    let lambda = 0.03;
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for t in 2..20 {
        let x = [1.0, series[t - 1], series[t - 2]];
        for i in 0..3 {
            b[i] += x[i] * series[t];
            for j in 0..3 {
                a[i][j] += x[i] * x[j];
            }
        }
    }
    a[1][1] += lambda;
    a[2][2] += lambda;
    let d = det3(a);
    let expected: Vec<f64> = (0..3)
        .map(|col| {
            let mut m = a;
            for row in 0..3 {
                m[row][col] = b[row];
            }
            det3(m) / d
        })
        .collect();
    let got = ridge_fit(&series, 2, lambda).unwrap();
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-8, "{got:?} vs {expected:?}");
    }
}

#[test]
fn heavy_ridge_keeps_only_the_intercept() {
    let series: Vec<f64> = (0..30).map(|t| (t as f64 * 0.3).cos() + 2.0).collect();
    let c = ridge_fit(&series, 3, 1e12).unwrap();
    let target_mean = series[3..].iter().sum::<f64>() / 27.0;
    assert!(c[1..].iter().all(|v| v.abs() < 1e-8));
    assert!((c[0] - target_mean).abs() < 1e-8);
}

#[test]
fn noisy_sir_recovers_beta() {
    let (obs, r) = sir_series(|_| 0.3, 0.1, 40, 1e-4, 1);
    let (b, _) = fit_constant_sir(&obs, &r).unwrap();
    assert!((b / 0.3 - 1.0).abs() < 0.1, "beta {b}");
}

#[test]
fn decaying_beta_is_tracked_day_by_day() {
    let beta = |t: usize| 0.3 * (-0.05 * t as f64).exp();
    let (obs, r) = sir_series(beta, 0.1, 40, 1e-6, 2);
    let rates = estimate_rate_series(&obs, &r).unwrap();
    assert_eq!(rates.len(), 39);
    for (t, b) in rates.beta.iter().enumerate() {
        let b = b.unwrap();
        assert!((b / beta(t) - 1.0).abs() < 0.05, "day {t}: {b} vs {}", beta(t));
    }
}

#[test]
fn single_pair_gives_single_rate() {
    let (obs, r) = sir_series(|_| 0.3, 0.1, 2, 0.0, 0);
    let rates = estimate_rate_series(&obs, &r).unwrap();
    assert_eq!(rates.len(), 1);
    assert!((rates.beta[0].unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn masked_days_drop_both_neighbouring_rates() {
    let (obs, r) = sir_series(|_| 0.3, 0.1, 20, 0.0, 0);
    let mut values = obs.values().to_vec();
    values[7] = None;
    let masked = ObservationSeries::new(values, scaling(), "masked").unwrap();
    let rates = estimate_rate_series(&masked, &r).unwrap();
    for t in 0..rates.len() {
        let touched = t == 6 || t == 7;
        assert_eq!(rates.beta[t].is_none(), touched, "day {t}");
        assert_eq!(rates.gamma[t].is_none(), touched, "day {t}");
    }
}

#[test]
fn constant_rates_reduce_time_dependent_sir_to_discrete_sir() {
    let (obs, r) = sir_series(|_| 0.25, 0.1, 30, 0.0, 0);
    let rates = estimate_rate_series(&obs, &r).unwrap();
    let model = TimeDependentSir::fit(&rates, DEFAULT_LAG, DEFAULT_LAMBDA).unwrap();
    let y0 = sir_anchor(&obs, &r).unwrap();
    let td = predict_time_dependent_sir(&rates, &model, y0, 29).unwrap();
    let constant = discrete_sir(0.25, 0.1, y0, 29).unwrap();
    for (a, b) in td.iter().zip(&constant) {
        assert!((a.i - b.i).abs() < 1e-8 && (a.s - b.s).abs() < 1e-8);
    }
}

#[test]
fn time_dependent_sir_beats_constant_sir_on_decaying_beta() {
    let beta = |t: usize| 0.4 * (-0.06 * t as f64).exp();
    let (obs, r) = sir_series(beta, 0.1, 50, 1e-5, 3);
    let y0 = sir_anchor(&obs, &r).unwrap();
    let (b, g) = fit_constant_sir(&obs, &r).unwrap();
    let constant = backtest("sir", &FittedModel::ConstantSir { beta: b, gamma: g, y0 }, &obs).unwrap();
    let rates = estimate_rate_series(&obs, &r).unwrap();
    let model = TimeDependentSir::fit(&rates, DEFAULT_LAG, DEFAULT_LAMBDA).unwrap();
    let td = backtest("td", &FittedModel::TimeDependentSir { model, rates, y0 }, &obs).unwrap();
    assert!(td.rmse < constant.rmse, "td {} constant {}", td.rmse, constant.rmse);
}

fn sudr_truth(xi: Vec<f64>) -> ModelParams {
    ModelParams::new(
        ContagionFunction::new(xi).unwrap(),
        0.8,
        1.0,
        5e-4,
        EpidemicState::new(0.7, 3e-4, 2e-4, 0.0),
    )
    .unwrap()
}

#[test]
fn complex_sir_with_flat_contagion_is_classic_sir() {
    let p = ModelParams::new(
        ContagionFunction::new(vec![0.4]).unwrap(),
        0.0,
        0.15,
        1e-3,
        EpidemicState::new(0.95, 0.05, 0.0, 0.0),
    )
    .unwrap();
    let predicted = FittedModel::ComplexSir(p).predict(40).unwrap();
    let sir = simulate_sir(0.4, 0.15, SirState::new(0.95, 0.05, 0.0), 40, DEFAULT_SUBSTEPS).unwrap();
    for (a, b) in predicted.iter().zip(&sir[1..]) {
        assert!((a - b.i).abs() < 1e-8);
    }
}

#[test]
fn generator_scores_at_noise_level() {
    let truth = sudr_truth(vec![3.0, 1.0, 1.0]);
    let days = 200;
    let ds = synthesize(&truth, days, scaling(), 21).unwrap();
    let result = backtest("sudr", &FittedModel::Sudr(truth.clone()), &ds.obs).unwrap();
    // the sample RMSE of pure noise concentrates at sigma with relative
    // spread 1/sqrt(2n); allow three of those
    let bound = truth.sigma * (1.0 + 3.0 / (2.0 * (days - 1) as f64).sqrt());
    assert!(result.rmse <= bound, "rmse {} bound {bound}", result.rmse);
    assert!(!result.empty_evaluation);
}

#[test]
fn fully_masked_evaluation_is_flagged() {
    let truth = sudr_truth(vec![3.0, 1.0, 1.0]);
    let ds = synthesize(&truth, 10, scaling(), 1).unwrap();
    let mut values = vec![None; 10];
    values[0] = ds.obs.values()[0];
    let obs = ObservationSeries::new(values, scaling(), "masked").unwrap();
    let result = backtest("sudr", &FittedModel::Sudr(truth), &obs).unwrap();
    assert!(result.empty_evaluation);
    assert_eq!(result.rmse, 0.0);
}

#[test]
fn sudr_truth_beats_classic_sir_on_masked_data() {
    let truth = sudr_truth(vec![3.0, 1.0, 1.0]);
    let ds = synthesize(&truth, 60, scaling(), 4).unwrap();
    let masked = mask_sparsity(&ds.obs, 0.2, 4).unwrap();
    let y0 = sir_anchor(&masked, &ds.documented_removed).unwrap();
    let (b, g) = fit_constant_sir(&masked, &ds.documented_removed).unwrap();
    let sir = backtest("sir", &FittedModel::ConstantSir { beta: b, gamma: g, y0 }, &masked).unwrap();
    let sudr = backtest("sudr", &FittedModel::Sudr(truth), &masked).unwrap();
    assert!(sudr.rmse < sir.rmse, "sudr {} sir {}", sudr.rmse, sir.rmse);
}

proptest! {
    #[test]
    fn ridge_shrinks_with_lambda(seed in 0u64..500, l1 in 0.0f64..10.0, extra in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let norm = |c: &[f64]| c[1..].iter().map(|v| v * v).sum::<f64>();
        let a = ridge_fit(&series, 2, l1 + 1e-6).unwrap();
        let b = ridge_fit(&series, 2, l1 + extra).unwrap();
        prop_assert!(norm(&b) <= norm(&a) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn exact_sir_inversion_for_any_rates(beta in 0.05f64..0.6, gamma in 0.01f64..0.3) {
        let (obs, r) = sir_series(|_| beta, gamma, 30, 0.0, 0);
        let (b, g) = fit_constant_sir(&obs, &r).unwrap();
        prop_assert!((b - beta).abs() < 1e-9 && (g - gamma).abs() < 1e-9);
    }
}
