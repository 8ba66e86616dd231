use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the admissible set of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate configuration: mode system for n = {mode} is singular (condition number {condition:.3e})")]
    DegenerateMode { mode: i64, condition: f64 },

    #[error("non-generic TLS instance: trailing block of the last right singular row vanishes (k = {k})")]
    NonGenericTls { k: usize },

    #[error("operator has an empty spectrum after trimming")]
    ZeroOperator,

    #[error("every point of the indicator map is flagged")]
    EmptyMap,

    #[error("noise check failed: ||A_delta - A|| / ||A|| = {ratio:.6e} exceeds delta = {delta:.6e}")]
    NoiseBound { ratio: f64, delta: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

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

/// Coarse failure class, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::Invalid(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Numerical,
        }
    }

    /// Exit code convention of the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }
}
