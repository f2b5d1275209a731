use thiserror::Error;

use crate::stream::ClassId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid class map: {0}")]
    ClassMap(String),

    #[error("frame {frame}: label {label} is outside the vocabulary of {classes} classes")]
    LabelOutOfRange {
        frame: usize,
        label: ClassId,
        classes: usize,
    },

    #[error("segments do not tile the stream: {0}")]
    SegmentLayout(String),

    #[error("stream lengths differ: prediction has {pred} frames, ground truth has {gt}")]
    LengthMismatch { pred: usize, gt: usize },

    #[error("bridging width b={b} must be at least 1 and below the cutoff {cutoff} of class {class}")]
    BridgeTooWide { b: usize, class: ClassId, cutoff: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed softmax frame: {0}")]
    Softmax(String),

    #[error("grid search has no valid configuration")]
    EmptyGrid,

    #[error("class-based cutoffs require fitted class statistics")]
    MissingStats,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
