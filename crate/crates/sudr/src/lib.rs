//! File formats, fitting pipeline and reports for the SUDR epidemic model.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod jhu;
pub mod manifest;
pub mod mode;
pub mod report;
pub mod robustness;

pub use error::{Error, Result};
