use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("all sample weights are zero")]
    DegenerateWeights,

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("black-box failed on sample {index}: {source}")]
    BlackBox {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("adapter error during {phase}: {message}")]
    Adapter { phase: AdapterPhase, message: String },

    #[error("adapter request {id} timed out after {seconds} s")]
    Timeout { id: u64, seconds: u64 },

    #[error("no samples could be drawn inside the requested region after {draws} draws")]
    EmptyRegion { draws: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Phase of the subprocess adapter lifecycle an error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterPhase {
    Spawn,
    Handshake,
    Request,
    Response,
    Validation,
}

impl std::fmt::Display for AdapterPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AdapterPhase::Spawn => "spawn",
            AdapterPhase::Handshake => "handshake",
            AdapterPhase::Request => "request",
            AdapterPhase::Response => "response",
            AdapterPhase::Validation => "validation",
        };
        f.write_str(s)
    }
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
