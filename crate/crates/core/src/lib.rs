//! Error level analysis (ELA) for JPEG forgery detection.
//!
//! The crate is split along the pipeline:
//!
//! * [`ela`] recompresses an image at a fixed JPEG quality and measures the
//!   per-sample difference against the source.
//! * [`dataset`] ingests an `Au/` + `Tp/` corpus, assigns stratified splits and
//!   turns records into normalized ELA tensors. It also synthesizes spliced
//!   images with a known tampered rectangle.
//! * [`classifier`] is a small convolutional network with explicit forward and
//!   backward passes, a global-average-pool → 1024 ReLU → 2-way softmax head,
//!   cross-entropy loss and Adam.
//! * [`metrics`] computes confusion counts, precision, recall, F-β, ROC and AUC.
//!
//! Tampered is the positive class (index 1) everywhere.

pub mod classifier;
pub mod dataset;
pub mod ela;
mod error;
pub mod io;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
