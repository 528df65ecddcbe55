use thiserror::Error;

/// Errors raised by formation construction, certification and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A constraint set or face tree is malformed (rank deficiency, no spanning tree, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// Evaluation outside the domain where a function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two routes to the same quantity disagree beyond tolerance.
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
