use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into two families that callers (the CLI in particular)
/// map to different exit codes: argument/domain problems are caller
/// mistakes, the remaining ones are numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("airy: x = {x} outside the supported range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error(
        "eigensolver did not converge (seed {seed}, replica {replica}, eigenvalue {index}) \
         after {iterations} iterations"
    )]
    NonConvergence {
        seed: u64,
        replica: u64,
        index: usize,
        iterations: usize,
    },

    #[error("eigenvalue pairing failed: {0}")]
    Pairing(String),

    #[error("SDE step failed at t = {time} after {halvings} halvings; state = {state:?}")]
    StepFailure { time: f64, halvings: u32, state: Vec<f64> },
}

impl Error {
    /// True for precondition violations, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Domain(_) | Error::OutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
