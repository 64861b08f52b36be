use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {requested} outside the supported range 1..={max}")]
    CapExceeded { requested: usize, max: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported method: {0}")]
    Unsupported(String),

    #[error("{}: {location}: {message}", path.display())]
    Ingest {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format version `{found}` (this build reads version {expected})")]
    Version { found: String, expected: String },

    #[error("model type mismatch: expected `{expected}`, found `{found}`")]
    ModelType { expected: String, found: String },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_)
            | Error::Version { .. }
            | Error::ModelType { .. }
            | Error::Unsupported(_)
            | Error::CapExceeded { .. } => 1,
            Error::Numerical(_) => 3,
            Error::QubitIndex { .. }
            | Error::Shape(_)
            | Error::Degenerate(_)
            | Error::InvalidInput(_)
            | Error::Ingest { .. }
            | Error::Parse { .. }
            | Error::Io(_) => 2,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
