use std::io;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("png encoding error: {0}")]
    Png(#[from] png::EncodingError),

    #[error("pfm parse error at byte {offset}: {message}")]
    Pfm { offset: usize, message: String },

    #[error("image dimensions {width}x{height} overflow the address space")]
    DimensionOverflow { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("wrong light kind for {operation}: {kind:?}")]
    WrongLightKind {
        operation: &'static str,
        kind: crate::scene::LightKind,
    },

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
