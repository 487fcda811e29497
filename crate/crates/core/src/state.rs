//! Compartment states and the SUDR parameter set.
//!
//! Every compartment is a density relative to the involved subpopulation
//! `P = alpha * W`, so the force of infection is `beta(i_u) * s * i_u`.

use crate::bernstein::ContagionFunction;
use crate::{CoreError, Result};

/// Densities of susceptible, undocumented infectious, documented infectious
/// and removed individuals at one time point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpidemicState {
    pub s: f64,
    pub i_u: f64,
    pub i_d: f64,
    pub r: f64,
}

impl EpidemicState {
    pub const fn new(s: f64, i_u: f64, i_d: f64, r: f64) -> Self {
        Self { s, i_u, i_d, r }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i_u + self.i_d + self.r
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.i_u, self.i_d, self.r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_valid(&self) -> bool {
        self.to_array()
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0)
    }
}

/// Three-compartment state used by the SIR-family baselines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SirState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl SirState {
    pub const fn new(s: f64, i: f64, r: f64) -> Self {
        Self { s, i, r }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Whole population `w`, involved fraction `alpha` and the modelled
/// subpopulation `p = alpha * w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationScaling {
    w: f64,
    alpha: f64,
    p: f64,
}

impl PopulationScaling {
    pub const DEFAULT_ALPHA: f64 = 0.01;

    pub fn new(w: f64, alpha: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "population must be positive, got {w}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "involved fraction must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self { w, alpha, p: alpha * w })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Full SUDR parameter set in constrained space.
///
/// The contagion coefficients follow the hierarchy `xi_i = mu_xi + delta_i`
/// with `delta_i >= 0`, so `mu_xi` is stored alongside them and never exceeds
/// the smallest coefficient. The removed compartment starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu_xi: f64,
    pub contagion: ContagionFunction,
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub y0: EpidemicState,
}

impl ModelParams {
    /// Builds parameters from coefficients alone, splitting the hierarchy at
    /// `mu_xi = min(xi) / 2`.
    pub fn new(
        contagion: ContagionFunction,
        theta: f64,
        gamma: f64,
        sigma: f64,
        y0: EpidemicState,
    ) -> Result<Self> {
        let mu_xi = 0.5 * contagion.min_coeff();
        Self::with_hierarchy(mu_xi, contagion, theta, gamma, sigma, y0)
    }

    pub fn with_hierarchy(
        mu_xi: f64,
        contagion: ContagionFunction,
        theta: f64,
        gamma: f64,
        sigma: f64,
        y0: EpidemicState,
    ) -> Result<Self> {
        let p = Self { mu_xi, contagion, theta, gamma, sigma, y0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [("theta", self.theta), ("gamma", self.gamma), ("sigma", self.sigma)];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::InvalidParameter(alloc::format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(self.mu_xi.is_finite() && self.mu_xi >= 0.0 && self.mu_xi <= self.contagion.min_coeff()) {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "mu_xi = {} must lie in [0, min xi = {}]",
                self.mu_xi,
                self.contagion.min_coeff()
            )));
        }
        if !self.y0.is_valid() {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "initial state {:?} has components outside [0, 1]",
                self.y0
            )));
        }
        Ok(())
    }

    /// `delta_i = xi_i - mu_xi`.
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.contagion.coeffs().iter().map(move |x| x - self.mu_xi)
    }

    pub fn degree(&self) -> usize {
        self.contagion.degree()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn scaling_is_alpha_times_w() {
        let s = PopulationScaling::new(8_847_037.0, 0.01).unwrap();
        assert_eq!(s.p(), 0.01 * 8_847_037.0);
        assert!(PopulationScaling::new(100.0, 0.0).is_err());
        assert!(PopulationScaling::new(100.0, 1.5).is_err());
        assert!(PopulationScaling::new(-1.0, 0.5).is_err());
        assert!(PopulationScaling::new(100.0, 1.0).is_ok());
    }

    #[test]
    fn params_validation() {
        let f = ContagionFunction::new(vec![2.0, 3.0]).unwrap();
        let y0 = EpidemicState::new(0.99, 0.01, 0.0, 0.0);
        let p = ModelParams::new(f.clone(), 0.5, 0.5, 0.1, y0).unwrap();
        assert_eq!(p.mu_xi, 1.0);
        let d: alloc::vec::Vec<f64> = p.deltas().collect();
        assert_eq!(d, vec![1.0, 2.0]);
        assert!(ModelParams::new(f.clone(), -0.1, 0.5, 0.1, y0).is_err());
        assert!(ModelParams::with_hierarchy(2.5, f.clone(), 0.1, 0.5, 0.1, y0).is_err());
        let bad = EpidemicState::new(1.2, 0.0, 0.0, 0.0);
        assert!(ModelParams::new(f, 0.1, 0.5, 0.1, bad).is_err());
    }
}
