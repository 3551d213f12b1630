use std::path::PathBuf;

/// Errors produced by the simulation and estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} is outside its valid domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("degenerate link: transmitter and receiver are {distance:e} m apart")]
    DegenerateDistance { distance: f64 },

    #[error("room discretization needs {needed} elements, cap is {cap}")]
    Resolution { needed: usize, cap: usize },

    #[error("radiosity system (I - E G) is numerically singular")]
    Singular,

    #[error("truncated Laplace acceptance probability {0:e} is below 1e-6")]
    NonConvergence(f64),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("room hash mismatch: model was built for {model}, dataset is {dataset}")]
    HashMismatch { model: String, dataset: String },

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed file {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Domain { .. }
            | Error::Resolution { .. }
            | Error::Shape { .. }
            | Error::EmptyPartition(_)
            | Error::EmptyInput(_)
            | Error::HashMismatch { .. } => ErrorClass::Config,
            Error::Io { .. } | Error::Format { .. } | Error::Version { .. } => ErrorClass::Io,
            Error::DegenerateDistance { .. }
            | Error::Singular
            | Error::NonConvergence(_)
            | Error::Divergence { .. } => ErrorClass::Numeric,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
