//! Evaluation and tracking toolkit for small multi-object tracking.
//!
//! The crate is split along the data flow of an evaluation run:
//!
//! - [`geometry`]: box similarity kernels (IoU, DotD, DIoU, expanded-box with distance penalty)
//! - [`data_io`]: MOTChallenge text, COCO-video JSON and affine sidecar files
//! - [`matching`]: per-frame optimal assignment and match accumulation
//! - [`metrics`]: SO-HOTA / HOTA suites, CLEAR metrics and IDF1
//! - [`synth`]: displacement study and seeded scene / corruption generators
//! - [`tracker`]: Kalman + observation-centric tracker, fusion and interpolation helpers

pub mod data_io;
pub mod error;
pub mod geometry;
pub mod hungarian;
pub mod matching;
pub mod metrics;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, MeanObjectSize, SimilarityMeasure};
