//! Semi-supervised call-center malpractice detection.
//!
//! The pipeline turns per-call segment timelines into four percentage
//! features (speech, music, noise, silence), optionally Gaussianizes them
//! (Z-score or Yeo-Johnson power transform), optionally learns features with
//! a contrastive-divergence-trained RBM, clusters with 2-means, and scores
//! against a small labeled validation set.

pub mod cluster;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod rbm;
pub mod search;
pub mod synth;
pub mod transform;

mod seed;

pub use seed::derive_seed;

/// Schema version stamped into every serialized model and report.
pub const SCHEMA_VERSION: u32 = 1;
