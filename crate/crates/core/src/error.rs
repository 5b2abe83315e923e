use thiserror::Error;

pub type Result<T> = std::result::Result<T, SbmError>;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum SbmError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("file is empty or has no data rows")]
    EmptyFile,
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("non-uniform sampling at row {row}: step {step_s} s, nominal {nominal_s} s")]
    NonUniformSampling {
        row: usize,
        step_s: f64,
        nominal_s: f64,
    },
    #[error("non-finite value at row {row}, channel `{channel}`")]
    NonFiniteValue { row: usize, channel: String },
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("window [{start}, {start}+{length}) out of range for length {available}")]
    OutOfRange {
        start: usize,
        length: usize,
        available: usize,
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid role map: {0}")]
    InvalidRoles(String),
    #[error("channel `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("cutoff {cutoff_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("invalid Savitzky-Golay spec: {0}")]
    InvalidSpec(String),
    #[error("signal of length {len} is shorter than window {window}")]
    SignalTooShort { len: usize, window: usize },
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("data too short: need more than {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("insufficient history: need {needed} values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),
    #[error("invalid filter tuning: {0}")]
    InvalidTuning(String),
    #[error("non-finite input to filter step")]
    NonFiniteInput,
    #[error("parameter estimate diverged: |theta[{index}]| = {value} exceeds guard {guard}")]
    DivergenceDetected {
        index: usize,
        value: f64,
        guard: f64,
    },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("invalid configuration `{key}`: {message}")]
    InvalidConfig { key: String, message: String },
}

impl SbmError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        SbmError::InvalidConfig {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad configuration or invalid input values
    /// rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SbmError::InvalidConfig { .. }
                | SbmError::InvalidRoles(_)
                | SbmError::InvalidSpec(_)
                | SbmError::InvalidTuning(_)
                | SbmError::MissingChannel(_)
                | SbmError::UnknownChannel(_)
                | SbmError::CutoffAboveNyquist { .. }
        )
    }
}
