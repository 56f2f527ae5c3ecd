use thiserror::Error;

/// Errors produced by the numerical kernels and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sphere frame undefined at the pole (theta = {theta})")]
    Pole { theta: f64 },

    #[error("quadrature resolution too low: {have} nodes per axis, {required} required")]
    Resolution { have: usize, required: usize },

    #[error("stationary phase not valid: Λcos²(θ₀/2)sin²(θ₀/2) = {value:.4} < {floor}")]
    StationaryInvalid { value: f64, floor: f64 },

    #[error("truncation guard violated: |f| = {max_abs:.3e} on the boundary shell (limit {limit:.1e})")]
    Truncation { max_abs: f64, limit: f64 },

    #[error("mean-zero requirement violated: |zero mode| = {0:.3e}")]
    MeanZero(f64),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
