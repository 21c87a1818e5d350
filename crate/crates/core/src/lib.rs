//! Affect recognition for advertisements.
//!
//! The crate covers the whole analysis chain for rating how arousing and how
//! pleasant an ad is:
//!
//! * [`data`]: domain types (labels, quadrants, ads, rating and feature matrices)
//! * [`stats`]: inter-rater agreement and hypothesis tests
//! * [`media`]: keyframes, spectrograms and low-level audio/video descriptors
//! * [`eeg`]: band-pass filtering, baseline removal, windowing and PCA
//! * [`learners`]: LDA, SMO-trained SVMs, graph-regularized multi-task
//!   regression and a small 1-D CNN
//! * [`eval`]: F1, repeated stratified cross-validation and decision fusion
//! * [`schedule`]: choosing which ads go into which scene transitions
//! * [`synth`]: seeded generators used as ground truth in tests
//! * [`io`]: on-disk formats for all of the above

pub mod data;
pub mod eeg;
mod error;
pub mod eval;
pub mod io;
pub mod learners;
pub mod linalg;
pub mod media;
pub mod schedule;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
