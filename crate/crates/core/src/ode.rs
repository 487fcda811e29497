//! Vector fields of the SUDR / SIR / complex-SIR models and a fixed-step
//! classical Runge-Kutta integrator that reports daily states.

use alloc::format;
use alloc::vec::Vec;

use crate::bernstein::ContagionFunction;
use crate::state::{EpidemicState, ModelParams, SirState};
use crate::{CoreError, Result};

pub const DEFAULT_SUBSTEPS: usize = 10;
/// Any component larger than this in magnitude means the parameters are invalid.
pub const BLOWUP_THRESHOLD: f64 = 10.0;
/// Negative components above `-NEGATIVE_CLAMP` are rounding noise and are zeroed.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Time derivative of the SUDR system.
pub fn sudr_derivative(y: &EpidemicState, p: &ModelParams) -> EpidemicState {
    EpidemicState::from_array(sudr_field(
        &p.contagion,
        p.theta,
        p.gamma,
        &y.to_array(),
    ))
}

#[inline]
pub(crate) fn sudr_field(f: &ContagionFunction, theta: f64, gamma: f64, y: &[f64; 4]) -> [f64; 4] {
    let [s, i_u, i_d, _] = *y;
    let infection = f.eval_clamped(i_u) * s * i_u;
    let detection = theta * i_u;
    let removal_u = gamma * i_u;
    let removal_d = gamma * i_d;
    [
        -infection,
        infection - detection - removal_u,
        detection - removal_d,
        removal_u + removal_d,
    ]
}

/// Classic SIR right-hand side with a constant transmission rate.
pub fn sir_derivative(y: &SirState, beta: f64, gamma: f64) -> SirState {
    let infection = beta * y.s * y.i;
    let removal = gamma * y.i;
    SirState::new(-infection, infection - removal, removal)
}

/// SIR with the transmission rate replaced by `beta(i)` from a Bernstein polynomial.
pub fn complex_sir_derivative(y: &SirState, f: &ContagionFunction, gamma: f64) -> SirState {
    sir_derivative(y, f.eval_clamped(y.i), gamma)
}

/// One classical RK4 step of size `h`.
#[inline]
pub fn rk4_step<const D: usize, F>(field: &F, y: &[f64; D], h: f64) -> [f64; D]
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let offset = |base: &[f64; D], k: &[f64; D], scale: f64| {
        let mut out = *base;
        for (o, kv) in out.iter_mut().zip(k) {
            *o += scale * kv;
        }
        out
    };
    let k1 = field(y);
    let k2 = field(&offset(y, &k1, 0.5 * h));
    let k3 = field(&offset(y, &k2, 0.5 * h));
    let k4 = field(&offset(y, &k3, h));
    let mut out = *y;
    for d in 0..D {
        out[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    }
    out
}

/// Integrates `days` days with `substeps` RK4 steps per day, calling
/// `on_day(t, state)` for every `t = 0..=days`.
pub fn integrate_with<const D: usize, F, G>(
    field: F,
    y0: [f64; D],
    days: usize,
    substeps: usize,
    mut on_day: G,
) -> Result<()>
where
    F: Fn(&[f64; D]) -> [f64; D],
    G: FnMut(usize, &[f64; D]),
{
    if substeps == 0 {
        return Err(CoreError::InvalidParameter("substeps per day must be >= 1".into()));
    }
    let h = 1.0 / substeps as f64;
    let mut y = y0;
    on_day(0, &y);
    for day in 1..=days {
        for _ in 0..substeps {
            y = rk4_step(&field, &y, h);
            sanitize(&mut y, day)?;
        }
        on_day(day, &y);
    }
    Ok(())
}

/// Integrates and collects the `days + 1` daily states.
pub fn integrate<const D: usize, F>(
    field: F,
    y0: [f64; D],
    days: usize,
    substeps: usize,
) -> Result<Vec<[f64; D]>>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let mut out = Vec::with_capacity(days + 1);
    integrate_with(field, y0, days, substeps, |_, y| out.push(*y))?;
    Ok(out)
}

fn sanitize<const D: usize>(y: &mut [f64; D], day: usize) -> Result<()> {
    for (idx, v) in y.iter_mut().enumerate() {
        if !v.is_finite() || v.abs() > BLOWUP_THRESHOLD {
            return Err(CoreError::Blowup {
                day,
                detail: format!("component {idx} reached {v}"),
            });
        }
        if *v < 0.0 {
            if *v > -NEGATIVE_CLAMP {
                *v = 0.0;
            } else {
                return Err(CoreError::Blowup {
                    day,
                    detail: format!("component {idx} went negative ({v})"),
                });
            }
        }
    }
    Ok(())
}

/// Daily SUDR states for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EpidemicState>,
    pub substep: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn undocumented(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.i_u)
    }

    pub fn documented(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.i_d)
    }
}

pub fn simulate_sudr(p: &ModelParams, days: usize, substeps: usize) -> Result<Trajectory> {
    let f = &p.contagion;
    let (theta, gamma) = (p.theta, p.gamma);
    let raw = integrate(
        |y| sudr_field(f, theta, gamma, y),
        p.y0.to_array(),
        days,
        substeps,
    )?;
    Ok(Trajectory {
        times: (0..=days).map(|t| t as f64).collect(),
        states: raw.into_iter().map(EpidemicState::from_array).collect(),
        substep: 1.0 / substeps as f64,
    })
}

/// Mean-field documented prevalence `i_d(t)` for `t = 1..=days`.
pub fn mean_field_prevalence(p: &ModelParams, days: usize) -> Result<Vec<f64>> {
    mean_field_prevalence_with(p, days, DEFAULT_SUBSTEPS)
}

pub fn mean_field_prevalence_with(p: &ModelParams, days: usize, substeps: usize) -> Result<Vec<f64>> {
    let f = &p.contagion;
    let (theta, gamma) = (p.theta, p.gamma);
    let mut out = Vec::with_capacity(days);
    integrate_with(
        |y| sudr_field(f, theta, gamma, y),
        p.y0.to_array(),
        days,
        substeps,
        |t, y| {
            if t > 0 {
                out.push(y[2]);
            }
        },
    )?;
    Ok(out)
}

/// Complex-SIR daily states for `t = 0..=days`.
pub fn simulate_complex_sir(
    f: &ContagionFunction,
    gamma: f64,
    y0: SirState,
    days: usize,
    substeps: usize,
) -> Result<Vec<SirState>> {
    let raw = integrate(
        |y: &[f64; 3]| complex_sir_derivative(&SirState::from_array(*y), f, gamma).to_array(),
        y0.to_array(),
        days,
        substeps,
    )?;
    Ok(raw.into_iter().map(SirState::from_array).collect())
}

/// Continuous constant-rate SIR daily states for `t = 0..=days`.
pub fn simulate_sir(beta: f64, gamma: f64, y0: SirState, days: usize, substeps: usize) -> Result<Vec<SirState>> {
    let raw = integrate(
        |y: &[f64; 3]| sir_derivative(&SirState::from_array(*y), beta, gamma).to_array(),
        y0.to_array(),
        days,
        substeps,
    )?;
    Ok(raw.into_iter().map(SirState::from_array).collect())
}
