use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid process specification: {0}")]
    InvalidSpec(String),

    #[error("{polynomial} polynomial has a root with modulus {modulus} (must exceed 1 + 1e-8)")]
    InvalidRoots {
        polynomial: &'static str,
        modulus: f64,
    },

    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),

    #[error("Toeplitz matrix is not positive definite (prediction variance {variance} at order {order})")]
    NotPositiveDefinite { order: usize, variance: f64 },

    #[error("weighted norm diverges: tail exponent {exponent} <= {required}")]
    DivergentNorm { exponent: f64, required: f64 },

    #[error("series expansion not converging after {terms} terms (last term {last_term:e})")]
    SeriesNotConverging { terms: usize, last_term: f64 },

    #[error("constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("invalid band: require 0 <= mu1 < mu2 <= pi, got mu1 = {mu1}, mu2 = {mu2}")]
    InvalidBand { mu1: f64, mu2: f64 },

    #[error("filter is incompatible with the process: {0}")]
    IncompatibleFilter(String),

    #[error("length mismatch: expected at least {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
