//! Priors and hyperpriors of the SUDR posterior.

use libm::log;

use crate::density::{half_cauchy_log_pdf, half_normal_log_pdf};
use crate::state::ModelParams;
use crate::{CoreError, Result};

/// Scales `a`-`h` and locations of the priors.
///
/// `sigma^2 ~ HalfCauchy(0, a)`, `mu_xi ~ HalfNormal(0, b)`,
/// `delta_i ~ HalfNormal(0, c)`, `theta ~ HalfCauchy(mu_theta, d)`,
/// `gamma ~ HalfCauchy(mu_gamma, e)`, and the initial densities
/// `S0, I^U_0, I^D_0` are half-normal with scales `f, g, h`.
///
/// `theta_max` and `gamma_max` optionally truncate the rate priors from
/// above; both are unbounded by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
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
    pub theta_max: f64,
    pub gamma_max: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 10.0,
            c: 5.0,
            d: 1.0,
            e: 10.0,
            f: 1.0,
            g: 1.0,
            h: 1.0,
            mu_theta: 0.0,
            mu_gamma: 0.0,
            mu_s0: 0.01,
            mu_iu0: 0.0,
            mu_id0: 0.0,
            theta_max: f64::INFINITY,
            gamma_max: f64::INFINITY,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let scales = [self.a, self.b, self.c, self.d, self.e, self.f, self.g, self.h];
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CoreError::InvalidParameter("prior scales must be positive and finite".into()));
        }
        let locs = [self.mu_theta, self.mu_gamma, self.mu_s0, self.mu_iu0, self.mu_id0];
        if locs.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(CoreError::InvalidParameter("prior locations must be non-negative".into()));
        }
        let state_locs = [self.mu_s0, self.mu_iu0, self.mu_id0];
        if state_locs.iter().any(|m| *m >= 1.0) {
            return Err(CoreError::InvalidParameter(
                "initial-state prior locations must be below 1".into(),
            ));
        }
        if !(self.theta_max > self.mu_theta && self.gamma_max > self.mu_gamma) {
            return Err(CoreError::InvalidParameter(
                "rate upper bounds must exceed their prior locations".into(),
            ));
        }
        Ok(())
    }

    /// Log prior density of the SUDR parameters.
    ///
    /// The density is over `(mu_xi, delta_0..delta_N, theta, gamma, sigma,
    /// S0, I^U_0, I^D_0)`. Because the half-Cauchy sits on the variance, the
    /// `sigma` term includes the change of variables `|d sigma^2 / d sigma| = 2 sigma`.
    /// Initial densities above 1 are outside the support.
    pub fn log_prior(&self, p: &ModelParams) -> f64 {
        self.log_prior_terms(p, true)
    }

    /// Complex-SIR variant: no detection rate and a single infectious
    /// compartment whose initial density uses the `g` prior.
    pub fn log_prior_complex_sir(&self, p: &ModelParams) -> f64 {
        self.log_prior_terms(p, false)
    }

    fn log_prior_terms(&self, p: &ModelParams, sudr: bool) -> f64 {
        if !(p.sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let y0 = &p.y0;
        if y0.s > 1.0 || y0.i_u > 1.0 || y0.i_d > 1.0 {
            return f64::NEG_INFINITY;
        }
        let mut lp = half_normal_log_pdf(p.mu_xi, 0.0, self.b);
        for delta in p.deltas() {
            lp += half_normal_log_pdf(delta, 0.0, self.c);
        }
        let var = p.sigma * p.sigma;
        lp += half_cauchy_log_pdf(var, 0.0, self.a) + log(2.0 * p.sigma);
        lp += truncated_half_cauchy_log_pdf(p.gamma, self.mu_gamma, self.e, self.gamma_max);
        lp += half_normal_log_pdf(y0.s, self.mu_s0, self.f);
        lp += half_normal_log_pdf(y0.i_u, self.mu_iu0, self.g);
        if sudr {
            lp += truncated_half_cauchy_log_pdf(p.theta, self.mu_theta, self.d, self.theta_max);
            lp += half_normal_log_pdf(y0.i_d, self.mu_id0, self.h);
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

/// Half-Cauchy on `[location, upper]`, renormalized.
fn truncated_half_cauchy_log_pdf(x: f64, location: f64, scale: f64, upper: f64) -> f64 {
    if upper.is_infinite() {
        return half_cauchy_log_pdf(x, location, scale);
    }
    if x > upper {
        return f64::NEG_INFINITY;
    }
    let mass = core::f64::consts::FRAC_2_PI * libm::atan((upper - location) / scale);
    half_cauchy_log_pdf(x, location, scale) - log(mass)
}

/// Free-function form of [`PriorSpec::log_prior`].
pub fn log_prior(p: &ModelParams, spec: &PriorSpec) -> f64 {
    spec.log_prior(p)
}
