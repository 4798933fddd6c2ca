//! Face mathematics: HOG features, detection, encoding and matching.
//!
//! Everything in here is a pure function of its inputs.

mod detect;
mod encode;
mod hog;
mod image;
mod matching;

use thiserror::Error;

pub use detect::{
    compute_hog, detect_faces, detect_scored, fit_detector, iou, nms, Detection, DetectorConfig,
    DetectorModel,
};
pub use encode::{
    encode_face, FaceEncoder, FaceEncoding, ReferenceEncoder, CANONICAL_FACE, ENCODING_DIM,
    PROJECTION_SEED,
};
pub use hog::{compute_hog_at, HogDescriptor, HogParams};
pub use image::{crop_resize, luma, BoundingBox, Channels, Image};
pub use matching::{
    best_match, compare_faces, face_distance, MatchConfig, MatchResult, PersonMatch,
    DEFAULT_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("training set has an empty class")]
    EmptyTrainingSet,
    #[error("class means coincide; the fitted weight vector is zero")]
    DegenerateModel,
    #[error("detector model has {actual} weights but the configuration needs {expected}")]
    ModelMismatch { expected: usize, actual: usize },
    #[error("malformed detector model: {0}")]
    ModelFormat(String),
    #[error("face crop has no gradient structure to encode")]
    DegenerateFace,
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
}
