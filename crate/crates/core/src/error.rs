use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("target-domain windows carry RUL labels; strip them before training")]
    TargetLabelsPresent,

    #[error("training diverged at epoch {epoch}, step {step}: {message}")]
    Diverged { epoch: usize, step: usize, message: String },

    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("container: {0}")]
    Container(String),

    #[error("mismatched data manifests: {0}")]
    ManifestMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
