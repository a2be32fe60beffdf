use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A point lies outside the domain where a function is defined.
    #[error("outside domain: {0}")]
    Domain(String),

    /// An iteration failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// No sign change was found while bracketing a zero.
    #[error("bracket failure: {0}")]
    Bracket(String),

    /// The zero-matching function never changed sign on the search grid.
    #[error("matching failure: {message}")]
    Matching {
        message: String,
        /// `(alpha, D(alpha))` samples evaluated before giving up.
        samples: Vec<(f64, f64)>,
    },

    /// A query produced no data (e.g. a window that misses every grid node).
    #[error("empty result: {0}")]
    Empty(String),

    /// The zero set is not a graph over the first `n - 1` coordinates.
    #[error("zero set is not a graph: {} offending column(s), first at {:?}", .columns.len(), .columns.first())]
    GraphViolation { columns: Vec<Vec<usize>> },

    /// A monotone inversion failed along the listed columns.
    #[error("transform failure: {} non-monotone column(s), first at {:?}", .columns.len(), .columns.first())]
    Transform { columns: Vec<Vec<usize>> },

    /// An operation whose hypotheses are not met by the input.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Problem data (coefficients, right-hand sides) is inconsistent.
    #[error("specification error: {0}")]
    Spec(String),

    /// Malformed text input (CSV, config files).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Argument(_) | Error::Domain(_) | Error::Spec(_) | Error::Parse(_) | Error::NotApplicable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}
