use alloc::string::String;

pub type Result<T, E = CoreError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("argument {value} outside the domain [0, 1]")]
    Domain { value: f64 },
    #[error("numerical blow-up at day {day}: {detail}")]
    Blowup { day: usize, detail: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singular linear system")]
    Singular,
    #[error("log density is not finite at {0}")]
    NonFinite(String),
    #[error("sampler failed: {0}")]
    SamplerFailed(String),
    #[error("prevalence {value} at index {index} exceeds 1; the involved fraction is too small for the data")]
    PrevalenceOverflow { index: usize, value: f64 },
}
