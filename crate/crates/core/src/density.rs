//! Closed-form log densities.
//!
//! The half distributions are the parent distribution truncated to
//! `[location, inf)` and renormalised by a factor of two.

use core::f64::consts::{LN_2, PI};

use libm::log;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -LN_SQRT_2PI - log(sd) - 0.5 * z * z
}

pub fn half_normal_log_pdf(x: f64, location: f64, scale: f64) -> f64 {
    if !(x >= location) {
        return f64::NEG_INFINITY;
    }
    LN_2 + normal_log_pdf(x, location, scale)
}

pub fn half_cauchy_log_pdf(x: f64, location: f64, scale: f64) -> f64 {
    if !(x >= location) {
        return f64::NEG_INFINITY;
    }
    let z = (x - location) / scale;
    LN_2 - log(PI) - log(scale) - libm::log1p(z * z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_cauchy_mode() {
        assert!((half_cauchy_log_pdf(0.0, 0.0, 1.0) - log(2.0 / PI)).abs() < 1e-15);
        assert!((half_cauchy_log_pdf(0.0, 0.0, 1.0) + 0.451_582_705_289_454_9).abs() < 1e-7);
        assert_eq!(half_cauchy_log_pdf(-0.1, 0.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(half_cauchy_log_pdf(0.5, 1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_at_mean() {
        assert!((normal_log_pdf(0.3, 0.3, 1.0) + 0.918_938_5).abs() < 1e-7);
        assert!((half_normal_log_pdf(0.0, 0.0, 1.0) - (LN_2 - LN_SQRT_2PI)).abs() < 1e-15);
        assert_eq!(half_normal_log_pdf(f64::NAN, 0.0, 1.0), f64::NEG_INFINITY);
    }
}
