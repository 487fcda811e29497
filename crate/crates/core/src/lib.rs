//! Numerical core of the SUDR probabilistic compartmental model.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the four-compartment
//! susceptible / undocumented / documented / removed dynamics with a
//! prevalence-dependent Bernstein contagion rate, the mean-field posterior
//! over its parameters, a fixed-trajectory-length HMC sampler with
//! convergence diagnostics, and the SIR-family baselines used for
//! backtesting. File formats, the CLI and threading live in the `sudr`
//! companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod bernstein;
pub mod data;
pub mod density;
pub mod diagnostics;
mod error;
pub mod hmc;
pub mod ode;
pub mod posterior;
pub mod prior;
pub mod state;

pub use bernstein::{bernstein_eval, ContagionFunction};
pub use error::{CoreError, Result};
pub use state::{EpidemicState, ModelParams, PopulationScaling, SirState};
