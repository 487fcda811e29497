//! Bernstein-polynomial contagion functions.

use alloc::vec::Vec;

use crate::{CoreError, Result};

/// Inputs this far outside `[0, 1]` are still clamped rather than rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

/// Prevalence-dependent transmission rate `beta(x) = sum_i xi_i C(N,i) x^i (1-x)^(N-i)`.
///
/// Degree `N` is `coeffs.len() - 1`. The binomial-weighted coefficients are
/// cached so evaluation inside the ODE right-hand side costs about `2N` flops.
#[derive(Debug, Clone, PartialEq)]
pub struct ContagionFunction {
    coeffs: Vec<f64>,
    weighted: Vec<f64>,
}

impl ContagionFunction {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(CoreError::InvalidParameter(
                "a contagion function needs at least one coefficient".into(),
            ));
        }
        if let Some(bad) = coeffs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(CoreError::InvalidParameter(alloc::format!(
                "Bernstein coefficient {bad} is not a finite non-negative rate"
            )));
        }
        let n = coeffs.len() - 1;
        let weighted = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * binomial(n, i))
            .collect();
        Ok(Self { coeffs, weighted })
    }

    /// A degree-0 function, i.e. a constant rate.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(alloc::vec![rate])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Evaluates the polynomial, rejecting `x` outside `[0, 1]` beyond [`DOMAIN_TOLERANCE`].
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= -DOMAIN_TOLERANCE && x <= 1.0 + DOMAIN_TOLERANCE) {
            return Err(CoreError::Domain { value: x });
        }
        Ok(self.eval_clamped(x))
    }

    /// Evaluates at `x` clamped into `[0, 1]`. Used by the vector fields,
    /// where intermediate Runge-Kutta stages may leave the box by rounding.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let n = self.degree();
        let s = 1.0 - x;
        // Horner in the ratio of the two basis factors; all terms are
        // non-negative so the recurrence is stable. The branch keeps the
        // ratio <= 1 and makes both endpoints exact.
        if x <= 0.5 {
            let t = x / s;
            let mut acc = self.weighted[n];
            for w in self.weighted[..n].iter().rev() {
                acc = acc * t + w;
            }
            acc * powi(s, n)
        } else {
            let t = s / x;
            let mut acc = self.weighted[0];
            for w in &self.weighted[1..] {
                acc = acc * t + w;
            }
            acc * powi(x, n)
        }
    }

    pub fn min_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Free-function form of [`ContagionFunction::eval`].
pub fn bernstein_eval(x: f64, f: &ContagionFunction) -> Result<f64> {
    f.eval(x)
}

/// `C(n, k)` as a float; exact for the degrees used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    libm::round(acc)
}

fn powi(base: f64, exp: usize) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b *= b;
        e >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_coefficients_give_constant_rate() {
        let f = ContagionFunction::new(vec![5.0, 5.0, 5.0]).unwrap();
        assert!((f.eval(0.3).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn degree_one_is_linear_interpolation() {
        let f = ContagionFunction::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.5);
    }

    #[test]
    fn endpoints_are_exact() {
        let f = ContagionFunction::new(vec![1.3, 4.0, 0.2, 7.7]).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.3);
        assert_eq!(f.eval(1.0).unwrap(), 7.7);
    }

    #[test]
    fn domain_is_enforced_with_tolerance() {
        let f = ContagionFunction::new(vec![1.0, 2.0]).unwrap();
        assert!(f.eval(-1e-13).is_ok());
        assert!(f.eval(1.0 + 1e-13).is_ok());
        assert_eq!(f.eval(-1e-9), Err(CoreError::Domain { value: -1e-9 }));
        assert!(f.eval(1.5).is_err());
        assert!(f.eval(f64::NAN).is_err());
    }

    #[test]
    fn rejects_negative_or_empty_coefficients() {
        assert!(ContagionFunction::new(vec![]).is_err());
        assert!(ContagionFunction::new(vec![1.0, -0.1]).is_err());
        assert!(ContagionFunction::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(8, 4), 70.0);
        assert_eq!(binomial(12, 0), 1.0);
        assert_eq!(binomial(12, 6), 924.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
