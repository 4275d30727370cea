use thiserror::Error;

/// Errors raised by the library. `is_input_error` separates caller mistakes
/// from numerical breakdowns so front-ends can map them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point is not on the unit circle of the norm (|‖z‖ - 1| = {residual:.3e})")]
    NotOnBoundary { residual: f64 },
    #[error("jump width {width:.6} is not below pi/2; use the linear-programming cost instead")]
    JumpTooWide { width: f64 },
    #[error("{what} did not converge after {iterations} iterations ({detail})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        detail: String,
    },
    #[error("non-finite {what} at cell ({i}, {j})")]
    NonFinite { what: &'static str, i: usize, j: usize },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::NotOnBoundary { .. } | Error::JumpTooWide { .. } | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
