use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or inconsistent.
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// A recurrence produced a non-positive or non-finite coefficient.
    #[error("numerical breakdown at index {index}: {msg}")]
    Breakdown { index: usize, msg: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A quadrature failed to reach its requested tolerance.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Restoring a Γ tensor would divide by a vanishing singular value.
    #[error("gauge degeneracy on bond {bond}: singular value {value:e} below floor")]
    GaugeDegeneracy { bond: usize, value: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }
}
