use std::path::PathBuf;

/// Errors produced by the metric pipeline and its I/O.
#[derive(Debug, thiserror::Error)]
pub enum FedError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("frame {height}x{width} is too small for block size {block}")]
    FrameTooSmall {
        height: usize,
        width: usize,
        block: usize,
    },

    #[error("GSM fit needs at least 2 blocks, got {0}")]
    TooFewBlocks(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed {format} input: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
}

impl FedError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FedError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(format: &'static str, reason: impl Into<String>) -> Self {
        FedError::Format {
            format,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = FedError> = std::result::Result<T, E>;
