use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("statistics undefined: {0}")]
    UndefinedStats(String),

    #[error("ambiguous centroid: profile support does not fit in half of a periodic axis of {extent} sites")]
    AmbiguousCentroid { extent: usize },

    #[error("explicit scheme unstable: diffusion ratio D*dt = {ratio} exceeds {limit}")]
    Cfl { ratio: f64, limit: f64 },

    /// Experiment configuration rejected; `field` is the dotted key path.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("dilated stencil does not fit the grid: reach {reach} needs more than {extent} sites")]
    DilationOverflow { reach: usize, extent: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's inputs rather than by a
    /// failure while computing.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidArgument(_) | Error::ShapeMismatch(_))
    }
}
