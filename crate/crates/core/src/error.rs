use thiserror::Error;

/// Errors raised by the library. The variant doubles as the failure category
/// reported by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is well-formed but too degenerate to produce a value
    /// (all points identical, constant sequences, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numerical routine failed (singular system, divergence, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A structured input (JSON, CSV) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A failure attributed to one contributor.
    #[error("contributor `{id}`: {source}")]
    Contributor {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Domain,
    Numerical,
    Io,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn for_contributor(self, id: &str) -> Self {
        Error::Contributor {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) | Error::Degenerate(_) => ErrorKind::Domain,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Parse(_) => ErrorKind::Parse,
            Error::Io(_) => ErrorKind::Io,
            Error::Contributor { source, .. } => source.kind(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
