//! Label-shift robustness tooling for weather-labelled driving datasets.
//!
//! * [`manifest`]: dataset model and JSON-Lines I/O
//! * [`shift`]: label-shift scenarios and seeded resampling
//! * [`simmap`]: embeddings and cosine similarity
//! * [`trainmap`]: similarity-mapped synthetic augmentation
//! * [`metrics`]: accuracy, precision/recall/F1, AP and mAP
//! * [`harness`]: experiment grids, improvement summaries and reports

pub mod error;
pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod shift;
pub mod simmap;
pub mod trainmap;

pub use error::{Error, Result};
