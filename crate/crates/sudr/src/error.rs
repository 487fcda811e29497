use std::path::PathBuf;

use sudr_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("country {0:?} not found")]
    MissingCountry(String),
    #[error("window {start}..{end} is outside the file span {first}..{last}")]
    WindowOutOfRange {
        start: String,
        end: String,
        first: String,
        last: String,
    },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("chains did not converge (max R-hat {max_rhat:.3}, min ESS {min_ess:.1})")]
    NotConverged { max_rhat: f64, min_ess: f64 },
    #[error("{failed} of {total} model runs failed")]
    PartialFailure { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(CoreError::SamplerFailed(_)) => "sampler_failed",
            Error::Core(CoreError::Blowup { .. }) => "blowup",
            Error::Core(_) => "invalid_input",
            Error::Inference(_) => "inference_failed",
            Error::Io { .. } => "io",
            Error::Malformed { .. } => "malformed_input",
            Error::MissingCountry(_) => "missing_country",
            Error::WindowOutOfRange { .. } => "window_out_of_range",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Config(_) => "invalid_config",
            Error::NotConverged { .. } => "not_converged",
            Error::PartialFailure { .. } => "partial_failure",
        }
    }

    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::MissingArtifact(_) => 1,
            Error::NotConverged { .. } => 3,
            Error::PartialFailure { .. } => 4,
            Error::Core(CoreError::SamplerFailed(_)) | Error::Inference(_) => 5,
            Error::Core(CoreError::Blowup { .. }) => 5,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
