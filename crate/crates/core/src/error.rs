use thiserror::Error;

/// Errors shared by the simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input failed validation; names the offending field.
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },

    /// The integrator lost more norm than the documented tolerance allows.
    #[error(
        "integration failed: norm drifted by {norm_drift:.3e} (reduce dt or enlarge the basis)"
    )]
    IntegrationFailure { norm_drift: f64 },

    /// Drift time is undefined because the beam is not deflected (A*S = 0).
    #[error("drift time undefined: A*S = 0 gives no deflection to drift against")]
    UndefinedDrift,

    /// Two grid states that must share geometry, time or norm do not.
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    /// The asymmetry basis cannot constrain the polarisation fit.
    #[error(
        "degenerate asymmetry basis (condition number {condition_number:.3e}); \
         unconstrained axes: {axes:?}"
    )]
    DegenerateBasis { condition_number: f64, axes: Vec<char> },
}

impl Error {
    pub(crate) fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation { field, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
