use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("degenerate spectrum: gap {gap:e} below required {required:e}")]
    DegenerateSpectrum { gap: f64, required: f64 },

    #[error("regularity: gradient norm {norm:e} below guard {guard:e}")]
    Regularity { norm: f64, guard: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no usable samples for {what} ({skipped} skipped)")]
    EmptySample { what: String, skipped: usize },

    #[error("convention error: {0}")]
    Convention(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
