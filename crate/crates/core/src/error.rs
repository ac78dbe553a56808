use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate pencil: all coefficient matrices vanish")]
    DegeneratePencil,

    #[error("relaxation order {order} is below the initial order {min}")]
    OrderTooSmall { order: usize, min: usize },

    /// The lineality space of the inner set is not contained in that of the outer set,
    /// so the inner (nonempty) spectrahedron cannot be contained in the outer one.
    #[error("not contained: lineality direction {direction:?} of the inner pencil is not a lineality direction of the outer pencil")]
    NotContained { direction: Vec<f64> },

    #[error("relaxation is unbounded")]
    Unbounded,

    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
