//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; the variants mirror the
//! failure modes of parameter validation, quadrature, sampling and the
//! variational optimizer so callers can match on the cause.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Spatial dimension outside the supported range 1..=8 or non-integral.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Shape exponent p outside the open interval (d/2, d).
    #[error("shape exponent error: {0}")]
    ShapeExponent(String),

    /// A parameter that must be strictly positive and finite is not.
    #[error("positivity error: {0}")]
    Positivity(String),

    /// Argument outside the mathematical domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation invoked for a (d, p) pair outside its regime of validity.
    #[error("regime error: {0}")]
    Regime(String),

    /// A quadrature error estimate failed to reach the requested tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A time-grid node landed exactly on the kernel pole with capping disabled.
    #[error("singularity error: {0}")]
    Singularity(String),

    /// Profile with vanishing norm or gradient where a ratio is required.
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// Scaling fit asked for with fewer than the minimum number of points.
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    /// Failure inside a dependency of the requested computation.
    #[error("propagated error from {context}: {source}")]
    Propagated {
        context: String,
        #[source]
        source: Box<Error>,
    },

    /// Malformed config file or CLI input.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn propagate(self, context: impl Into<String>) -> Self {
        Error::Propagated {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
