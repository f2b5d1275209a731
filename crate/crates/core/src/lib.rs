//! Streaming post-processing for online temporal action segmentation.
//!
//! * [`stream`]: label streams, vocabularies and run-length segments.
//! * [`sampling`]: dense, surround and sliding-window clip indices.
//! * [`cutoffs`]: log-normal class statistics and minimum-segment cutoffs.
//! * [`cleaner`]: the online label cleaner and its reference scan.
//! * [`baselines`]: recursive averaging and modal smoothing.
//! * [`metrics`]: frame accuracy, segmental F1@IoU, edit score.
//! * [`simulate`]: synthetic ground truth and corrupted predictions.
//! * [`tune`]: grid search over cleaner parameters.
//! * [`io`]: mapping and label file formats.

pub mod baselines;
pub mod bench;
pub mod cleaner;
pub mod cutoffs;
pub mod error;
pub mod io;
pub mod metrics;
pub mod sampling;
pub mod simulate;
pub mod stream;
pub mod tune;

pub use error::{Error, Result};
