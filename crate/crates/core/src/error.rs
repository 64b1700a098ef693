use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear algebra error: {message} (singular values: {singular_values:?})")]
    LinearAlgebra {
        message: String,
        singular_values: Vec<f64>,
    },

    #[error("group closure exceeded {cap} elements; the simple roots may not generate a finite group at this cap")]
    NotFinite { cap: usize },

    #[error("boundary point: {0}")]
    BoundaryPoint(String),

    /// The row span of `C Λ` is not invariant under the group element.
    #[error("span not invariant under group element {word:?} (residual {residual:e})")]
    SpanNotInvariant { word: Vec<usize>, residual: f64 },

    #[error("geometry inconsistency: {message} (residual {residual:e})")]
    Geometry { message: String, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
