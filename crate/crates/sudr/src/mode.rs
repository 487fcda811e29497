//! Posterior mode search and the Gaussian (Laplace) approximation around it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sudr_core::hmc::LogDensity;

use crate::error::{Error, Result};

/// Curvature floor when inverting the Hessian; caps variances at `1 / MIN_CURVATURE`.
const MIN_CURVATURE: f64 = 0.1;
/// Largest coordinate change a single quasi-Newton step may make.
const MAX_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub position: Vec<f64>,
    pub log_density: f64,
}

/// BFGS ascent on the log density from one start.
///
/// Steps are capped at `MAX_STEP` per coordinate and backtrack out of
/// regions where the density is not finite, so a poorly scaled first
/// gradient cannot throw the search into a distant basin.
pub fn climb<T: LogDensity + ?Sized>(target: &T, start: Vec<f64>, max_iters: usize) -> Option<Mode> {
    let n = start.len();
    let mut x = DVector::from_vec(start);
    let mut f = target.log_density(x.as_slice());
    if !f.is_finite() {
        return None;
    }
    let grad = |x: &DVector<f64>| target.gradient(x.as_slice()).ok().map(DVector::from_vec);
    let mut g = grad(&x)?;
    // inverse Hessian of the negative log density
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut stalled = 0;
    for _ in 0..max_iters {
        let mut d = &h * &g;
        if d.dot(&g) <= 0.0 {
            h = DMatrix::identity(n, n);
            d = g.clone();
        }
        let largest = d.amax();
        if largest > MAX_STEP {
            d *= MAX_STEP / largest;
        }
        let slope = d.dot(&g);
        let mut t = 1.0;
        let accepted = loop {
            let trial = &x + &d * t;
            let ft = target.log_density(trial.as_slice());
            if ft.is_finite() && ft >= f + 1e-4 * t * slope {
                if let Some(gt) = grad(&trial) {
                    break Some((trial, ft, gt));
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((x_new, f_new, g_new)) = accepted else { break };
        let s = &x_new - &x;
        // gradient of the negative log density changes by -(g_new - g)
        let y = &g - &g_new;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            if first {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first = false;
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            h = left * h * right + &s * s.transpose() * rho;
        }
        let gain = f_new - f;
        x = x_new;
        f = f_new;
        g = g_new;
        stalled = if gain < 1e-10 * (1.0 + f.abs()) { stalled + 1 } else { 0 };
        if g.amax() < 1e-6 || stalled >= 10 {
            break;
        }
    }
    Some(Mode { position: x.as_slice().to_vec(), log_density: f })
}

/// Best mode over `starts` random restarts around the target's own
/// initial points, each perturbed uniformly by `+-spread`.
pub fn find_mode<T: LogDensity + ?Sized>(target: &T, starts: usize, spread: f64, seed: u64) -> Result<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Mode> = None;
    for _ in 0..starts.max(1) {
        let start: Vec<f64> = target
            .initial_point(&mut rng)
            .into_iter()
            .map(|v| v + rng.random_range(-spread..=spread))
            .collect();
        if !target.log_density(&start).is_finite() {
            continue;
        }
        if let Some(mode) = climb(target, start, 1000) {
            if best.as_ref().is_none_or(|b| mode.log_density > b.log_density) {
                best = Some(mode);
            }
        }
    }
    best.ok_or_else(|| Error::Inference("mode search failed from every start".into()))
}

/// Finite-difference Hessian of the log density.
pub fn hessian<T: LogDensity + ?Sized>(target: &T, z: &[f64]) -> DMatrix<f64> {
    hessian_with_step(target, z, 1e-3)
}

/// Finite-difference Hessian with per-coordinate step `rel * max(1, |z_i|)`.
pub fn hessian_with_step<T: LogDensity + ?Sized>(target: &T, z: &[f64], rel: f64) -> DMatrix<f64> {
    let n = z.len();
    let steps: Vec<f64> = z.iter().map(|v| rel * v.abs().max(1.0)).collect();
    let mut work = z.to_vec();
    let f = |work: &mut Vec<f64>, di: (usize, f64), dj: (usize, f64)| {
        work[di.0] += di.1;
        work[dj.0] += dj.1;
        let v = target.log_density(work);
        work[di.0] -= di.1;
        work[dj.0] -= dj.1;
        v
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (hi, hj) = (steps[i], steps[j]);
            let v = (f(&mut work, (i, hi), (j, hj)) - f(&mut work, (i, hi), (j, -hj))
                - f(&mut work, (i, -hi), (j, hj))
                + f(&mut work, (i, -hi), (j, -hj)))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Covariance of the Gaussian approximation at `z`, row-major.
///
/// Eigenvalues of the negative Hessian are floored so that flat or
/// non-concave directions get a bounded variance.
pub fn laplace_covariance<T: LogDensity + ?Sized>(target: &T, z: &[f64]) -> Result<Vec<f64>> {
    let h = hessian(target, z);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Inference("Hessian at the mode is not finite".into()));
    }
    let eig = SymmetricEigen::new(-h);
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(MIN_CURVATURE));
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    Ok(cov.transpose().as_slice().to_vec())
}
