use alloc::string::String;

/// Errors raised by the simulator, the fluid engine and the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A modelling assumption required by the fluid engine does not hold.
    #[error("assumption violation ({assumption}): {detail}")]
    AssumptionViolation {
        assumption: &'static str,
        detail: String,
    },
    #[error("quadrature did not reach tolerance {tolerance:e} on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64, tolerance: f64 },
    #[error("no bracket found for chi(x = {x}, t = {t})")]
    BracketNotFound { x: f64, t: f64 },
    #[error("root not found: {0}")]
    RootNotFound(String),
    #[error("wrong regime: {0}")]
    RegimeError(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("event overflow: more than {cap} events")]
    EventOverflow { cap: u64 },
    #[error("empty initial measure")]
    EmptyInitialMeasure,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn assumption(assumption: &'static str, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation {
            assumption,
            detail: detail.into(),
        }
    }

    /// True for errors caused by the input configuration rather than by the run.
    pub fn is_configuration_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::AssumptionViolation { .. }
                | Error::RegimeError(_)
                | Error::EmptyInitialMeasure
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
