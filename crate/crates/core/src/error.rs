//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("too few distinct points: need {needed}, found {found} ({what})")]
    TooFewDistinctPoints {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("duplicate block name: {0}")]
    DuplicateBlockName(String),

    #[error("descriptor layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("too few examples: need at least {needed}, got {got}")]
    TooFewExamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss at iteration {iteration} (batch indices {batch:?})")]
    NonFiniteLoss { iteration: usize, batch: Vec<usize> },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("target dimensions {target_w}x{target_h} exceed source {source_w}x{source_h}")]
    TargetLargerThanSource {
        target_w: usize,
        target_h: usize,
        source_w: usize,
        source_h: usize,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error at {locator}: {message}")]
    Validation { locator: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn validation(locator: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            locator: locator.into(),
            message: message.into(),
        }
    }
}
