use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An abscissa fell outside the domain an object was built for.
    #[error("{what}: {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// Invalid input parameters or a violated precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The computation produced a non-finite or sign-violating value.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Adaptive step size collapsed below the representable resolution.
    #[error("step size underflow at theta = {theta} (h = {step})")]
    Stiffness { theta: f64, step: f64 },
    /// An object required by the operation is missing or mismatched.
    #[error("state error: {0}")]
    State(String),
    /// A grid is too coarse for the requested bracket.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// An internal invariant guaranteed by theory was observed to fail.
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerics.
    pub fn is_argument(&self) -> bool {
        matches!(self, Error::Argument(_) | Error::Range { .. } | Error::State(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
