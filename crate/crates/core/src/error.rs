use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("graph generation failed: {0}")]
    GenerationFailure(String),

    #[error("data format error at line {line}: {message}")]
    DataFormat { line: usize, message: String },

    #[error("iterates diverged (non-finite value) at iteration {iteration}")]
    Divergence { iteration: u64 },

    #[error("certificate not applicable: {0}")]
    CertificateNotApplicable(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 configuration, 3 numerical failure or divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::PreconditionViolation(_) => 2,
            Error::NumericalFailure(_)
            | Error::Divergence { .. }
            | Error::GenerationFailure(_)
            | Error::CertificateNotApplicable(_) => 3,
            Error::Io { .. } | Error::DataFormat { .. } => 4,
            Error::Stage { .. } => unreachable!("root() strips stage labels"),
        }
    }
}
