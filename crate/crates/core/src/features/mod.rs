//! Feature masks, signature histograms and the location likelihood map.
//!
//! A signature histogram has one non-edge bin plus an `A x B` grid indexed by
//! edge normal angle and edge brightness. A trained model is the floored,
//! renormalized mean of normalized training signatures.

mod histogram;
mod likelihood;
mod mask;
mod model;

pub use histogram::{distance, distance_kullback, distance_l1, normalize_histogram, Measure, SignatureHistogram};
pub use likelihood::{build_likelihood_map, LikelihoodMap};
pub use mask::{load_mask_stencil, FeatureMask};
pub use model::{
    collect_signature, model_from_signatures, train_model, FeatureModel, TrainingSample, DEFAULT_MODEL_FLOOR,
};

pub const DEFAULT_ANGLE_BINS: usize = 8;
pub const DEFAULT_BRIGHTNESS_BINS: usize = 8;
