use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index out of bounds: {detail}")]
    Bounds { detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A configuration value violated a named constraint.
    #[error("invalid configuration: {constraint} ({detail})")]
    Config {
        constraint: &'static str,
        detail: String,
    },

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error("stride {stride}: {source}")]
    Stride {
        stride: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            got,
        }
    }

    pub(crate) fn bounds(detail: impl Into<String>) -> Self {
        Error::Bounds {
            detail: detail.into(),
        }
    }

    pub(crate) fn config(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::Config {
            constraint,
            detail: detail.into(),
        }
    }

    /// Strips any stride annotation and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stride { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
