//! Crate-wide error type.

use thiserror::Error;

/// Unified error for numerical and configuration failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter was outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A quadrature tail bound could not be certified at the requested tolerance.
    #[error("tail bound not certifiable: {0}")]
    TailBound(String),

    /// A matrix that must be (numerically) positive semi-definite was not.
    #[error("covariance not PSD: most negative eigenvalue {min_eig:.3e} below tolerance")]
    NotPsd { min_eig: f64 },

    /// Conditioning on a degenerate observed block.
    #[error("observed block numerically singular: null direction {null_dir:?} (rel. eigenvalue {rel_eig:.3e})")]
    DegenerateCondition { null_dir: Vec<f64>, rel_eig: f64 },

    /// Divergent expectation (e.g. shifted-determinant average with u ≥ 2v).
    #[error("expectation diverges: {0}")]
    Divergent(String),

    /// Critical-point completeness could not be certified.
    #[error("critical point list unreliable: {0}")]
    Unreliable(String),

    /// A degenerate critical point blocks index-based certification.
    #[error("degenerate critical point: {0}")]
    Degenerate(String),

    /// Configuration file / CLI errors.
    #[error("config error: {0}")]
    Config(String),

    /// Artifact IO.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization of configs or artifacts.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV artifact writing.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
