//! Error types shared by every module of the engine.
//!
//! All fallible operations return [`Result`]. Physics-validity failures
//! (a closed form applied outside its regime) are distinct variants from
//! plain argument errors so callers can report them differently.

use thiserror::Error;

/// Errors produced by the physics and statistics engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (wrong sign, non-finite, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The pump-to-signal detuning falls outside the four-wave-mixing gain
    /// bandwidth, where the closed-form pair rate does not apply.
    #[error(
        "detuning {detuning_hz:.3e} Hz exceeds the four-wave-mixing gain \
         half-bandwidth {half_bandwidth_hz:.3e} Hz; the closed-form pair rate \
         is only valid inside the gain band"
    )]
    DetuningOutOfBand {
        detuning_hz: f64,
        half_bandwidth_hz: f64,
    },

    /// A per-gate detection probability is too large for the first-order
    /// (linearized Poisson) rate model.
    #[error(
        "per-gate detection probability {prob:.3e} is in the saturation \
         regime (limit {limit}); the first-order rate model does not apply"
    )]
    SaturationRegime { prob: f64, limit: f64 },

    /// A coincidence-to-accidental ratio could not be formed.
    #[error("CAR is undefined: {0}")]
    UndefinedCar(String),
}

/// Convenience alias used throughout the engine.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an [`Error::InvalidParameter`] with a formatted message.
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
