use crate::io::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid specs differ between inputs")]
    SpecMismatch,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("scene generation infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
