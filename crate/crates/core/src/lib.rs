//! Point-cloud object recognition with a saliency-boost pre-filter.
//!
//! The crate implements the classical local-descriptor pipeline
//! (keypoints -> descriptors -> matching -> geometric grouping -> 6-DoF
//! pose) together with a saliency pre-filter that restricts the expensive
//! stages to salient regions of the registered RGB image, plus a benchmark
//! harness comparing the plain and boosted pipelines.

pub mod cloud;
pub mod error;
pub mod io;
pub mod math;
pub mod spatial;
pub mod geometry;
pub mod saliency;
pub mod detect;
pub mod describe;
pub mod recognize;
pub mod eval;
pub mod synth;
pub mod pipeline;
pub mod bench;
pub mod config;

pub use error::{Error, Result};
