use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed record in an input stream. `line` is 1-based; 0 means the
    /// problem is not tied to a single line (e.g. a truncated binary index).
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid timestamp {token:?}: {reason}")]
    Timestamp { token: String, reason: String },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("duplicate video id {0:?} in corpus")]
    DuplicateVideo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// Line number for positioned errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Format { line, .. } => Some(*line),
            _ => None,
        }
    }

    /// True for errors caused by the content of an input rather than the
    /// environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
