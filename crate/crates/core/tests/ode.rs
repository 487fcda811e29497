use proptest::prelude::*;
use sudr_core::ode::{simulate_complex_sir, simulate_sir, simulate_sudr, DEFAULT_SUBSTEPS};
use sudr_core::{ContagionFunction, EpidemicState, ModelParams, SirState};

fn params(xi: &[f64], theta: f64, gamma: f64, y0: [f64; 3]) -> ModelParams {
    let f = ContagionFunction::new(xi.to_vec()).unwrap();
    ModelParams::new(f, theta, gamma, 1e-3, EpidemicState::new(y0[0], y0[1], y0[2], 0.0)).unwrap()
}

fn beta(xi: &[f64], x: f64) -> f64 {
    let n = xi.len() - 1;
    let mut c = 1.0;
    let mut sum = 0.0;
    for (k, v) in xi.iter().enumerate() {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        sum += v * c * x.powi(k as i32) * (1.0 - x).powi((n - k) as i32);
    }
    sum
}

/// Forward Euler with step `h`, written from the model equations.
fn euler(xi: &[f64], theta: f64, gamma: f64, y0: [f64; 4], days: usize, h: f64) -> Vec<[f64; 4]> {
    let steps = (1.0 / h).round() as usize;
    let mut y = y0;
    let mut out = vec![y];
    for _ in 0..days {
        for _ in 0..steps {
            let [s, u, d, _] = y;
            let inf = beta(xi, u) * s * u;
            let dy = [-inf, inf - theta * u - gamma * u, theta * u - gamma * d, gamma * (u + d)];
            for k in 0..4 {
                y[k] += h * dy[k];
            }
        }
        out.push(y);
    }
    out
}

#[test]
fn conservation_along_sixty_days() {
    for (xi, theta, gamma) in [
        (vec![2.0, 10.0, 1.0], 0.8, 1.0),
        (vec![3.0, 1.0, 1.0], 0.3, 0.2),
        (vec![0.5, 6.0, 2.0, 9.0, 1.0, 4.0, 0.2, 3.0, 5.0], 0.9, 0.1),
    ] {
        let p = params(&xi, theta, gamma, [0.9, 1e-3, 5e-4]);
        let tr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
        let total0 = tr.states[0].total();
        for s in &tr.states {
            assert!((s.total() - total0).abs() <= 1e-8);
        }
    }
}

#[test]
fn rk4_matches_fine_euler() {
    let xi = [2.0, 10.0, 1.0];
    let (theta, gamma) = (0.8, 1.0);
    let y0 = [0.99, 2e-4, 1e-4, 0.0];
    let p = params(&xi, theta, gamma, [y0[0], y0[1], y0[2]]);
    let tr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
    let oracle = euler(&xi, theta, gamma, y0, 60, 1e-5);
    for (s, o) in tr.states.iter().zip(&oracle) {
        let got = s.to_array();
        for k in 0..4 {
            assert!((got[k] - o[k]).abs() < 1e-6, "component {k}: {} vs {}", got[k], o[k]);
        }
    }
}

#[test]
fn fourth_order_convergence() {
    let p = params(&[3.0, 1.0, 1.0], 0.8, 1.0, [0.9, 0.05, 0.01]);
    let reference = simulate_sudr(&p, 10, 640).unwrap().states[10].to_array();
    let err = |n| {
        let y = simulate_sudr(&p, 10, n).unwrap().states[10].to_array();
        (0..4).map(|k| (y[k] - reference[k]).abs()).fold(0.0, f64::max)
    };
    let ratio = err(4) / err(8);
    assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
}

#[test]
fn no_detection_reduces_to_complex_sir() {
    let xi = [1.5, 4.0, 0.7];
    let p = params(&xi, 0.0, 0.4, [0.95, 0.02, 0.0]);
    let sudr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
    let f = ContagionFunction::new(xi.to_vec()).unwrap();
    let sir = simulate_complex_sir(&f, 0.4, SirState::new(0.95, 0.02, 0.0), 60, DEFAULT_SUBSTEPS).unwrap();
    for (a, b) in sudr.states.iter().zip(&sir) {
        assert!((a.s - b.s).abs() < 1e-10);
        assert!((a.i_u - b.i).abs() < 1e-10);
        assert!((a.r - b.r).abs() < 1e-10);
        assert_eq!(a.i_d, 0.0);
    }
}

#[test]
fn constant_contagion_is_classic_sir() {
    let f = ContagionFunction::constant(0.5).unwrap();
    let y0 = SirState::new(0.97, 0.03, 0.0);
    let a = simulate_complex_sir(&f, 0.2, y0, 40, DEFAULT_SUBSTEPS).unwrap();
    let b = simulate_sir(0.5, 0.2, y0, 40, DEFAULT_SUBSTEPS).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.i - y.i).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn states_stay_in_unit_box(
        xi in prop::collection::vec(0.0f64..8.0, 1..=9),
        theta in 0.0f64..2.0,
        gamma in 0.0f64..2.0,
        s0 in 0.5f64..0.99,
        iu0 in 1e-5f64..0.01,
    ) {
        let p = params(&xi, theta, gamma, [s0, iu0, 0.0]);
        let tr = simulate_sudr(&p, 60, DEFAULT_SUBSTEPS).unwrap();
        for s in &tr.states {
            for v in s.to_array() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            prop_assert!((s.total() - tr.states[0].total()).abs() <= 1e-8);
        }
    }
}
