//! Head pose estimation from a single image.
//!
//! The pipeline sharpens the image, extracts two-sided color edges, matches
//! edge-signature histograms of three facial features against trained models,
//! picks the most plausible arrangement of candidate locations and recovers
//! the 3D orientation of the feature triangle from its perspective projection.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constellation;
pub mod error;
pub mod features;
pub mod imaging;
pub mod peaks;
pub mod pose;
pub mod synth;

pub use error::{Error, Result};
