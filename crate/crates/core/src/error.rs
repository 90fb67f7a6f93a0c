use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the editing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("parameter layout mismatch")]
    LayoutMismatch,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty node selection for loss")]
    EmptySelection,

    #[error("backward called on a tape with no recorded forward pass")]
    EmptyTape,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("QP solver failed: {0}")]
    QpFailure(String),

    #[error("model fingerprint mismatch: anchors captured at {expected}, model is {got}")]
    FingerprintMismatch { expected: String, got: String },

    #[error("model is already an EGNN; double stitching rejected")]
    AlreadyStitched,
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors that originate in malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGraph(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::FingerprintMismatch { .. }
        )
    }

    /// True for errors caused by numerical breakdown.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::NonFinite(_) | Error::QpFailure(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
