use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed or inconsistent record in a text input.
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    /// A malformed binary or JSON artifact (index, model).
    #[error("malformed {what}: {message}")]
    Decode { what: &'static str, message: String },

    #[error("unknown type `{0}`")]
    UnknownType(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A pipeline stage failed; wraps the cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: "<input>".to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn decode(what: &'static str, message: impl Into<String>) -> Self {
        Error::Decode {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Rewrites the origin of a parse error so messages name the file.
    pub fn with_origin(self, origin: &str) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                origin: origin.to_string(),
                line,
                message,
            },
            other => other,
        }
    }

    /// True for invalid arguments or configuration, including inside a stage.
    pub fn is_usage_error(&self) -> bool {
        match self {
            Error::InvalidArgument(_) => true,
            Error::Stage { source, .. } => source.is_usage_error(),
            _ => false,
        }
    }

    /// True for errors caused by bad input data rather than bad usage or I/O.
    pub fn is_data_error(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_data_error();
        }
        matches!(
            self,
            Error::Parse { .. }
                | Error::Decode { .. }
                | Error::UnknownType(_)
                | Error::UnknownEntity(_)
                | Error::InvalidData(_)
        )
    }
}
