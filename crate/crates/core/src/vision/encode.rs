//! 128-dimensional face encodings.
//!
//! The reference encoder crops the face, resizes it to 128x128, computes HOG
//! and projects it with a fixed Gaussian matrix before L2 normalisation. The
//! matrix comes from SplitMix64 seeded with `0x4D465253` through Box–Muller,
//! filled row-major, so encodings are bit-stable everywhere.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::hog::{compute_hog_at, HogParams};
use super::image::{BoundingBox, Image};
use super::{DetectorConfig, VisionError};
use crate::rng::Gaussian;

pub const ENCODING_DIM: usize = 128;
pub const CANONICAL_FACE: usize = 128;
pub const PROJECTION_SEED: u64 = 0x4D46_5253;

/// Unit-norm vector of exactly [`ENCODING_DIM`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FaceEncoding(Vec<f64>);

impl FaceEncoding {
    /// Accepts any finite 128-vector; callers that need unit norm use
    /// [`FaceEncoding::normalized`].
    pub fn new(values: Vec<f64>) -> Result<Self, VisionError> {
        if values.len() != ENCODING_DIM {
            return Err(VisionError::InvalidEncoding(format!(
                "expected {ENCODING_DIM} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VisionError::InvalidEncoding("non-finite value".into()));
        }
        Ok(Self(values))
    }

    /// Scale `values` to unit length.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn normalized(mut values: Vec<f64>) -> Result<Self, VisionError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(VisionError::DegenerateFace);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for FaceEncoding {
    type Error = VisionError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<FaceEncoding> for Vec<f64> {
    fn from(e: FaceEncoding) -> Self {
        e.0
    }
}

/// Anything that turns a located face into an encoding.
pub trait FaceEncoder: Send + Sync {
    fn encode(&self, image: &Image, face: &BoundingBox) -> Result<FaceEncoding, VisionError>;
}

/// HOG + fixed random projection.
#[derive(Debug, Clone)]
pub struct ReferenceEncoder {
    hog: HogParams,
    input_len: usize,
    projection: Arc<Vec<f64>>,
}

impl ReferenceEncoder {
    pub fn new(hog: HogParams) -> Self {
        let input_len = hog.descriptor_len(CANONICAL_FACE, CANONICAL_FACE);
        let mut gauss = Gaussian::new(PROJECTION_SEED);
        let projection = (0..ENCODING_DIM * input_len).map(|_| gauss.next()).collect();
        Self {
            hog,
            input_len,
            projection: Arc::new(projection),
        }
    }

    /// Shared instance for the default HOG layout.
    pub fn shared() -> &'static ReferenceEncoder {
        static DEFAULT: OnceLock<ReferenceEncoder> = OnceLock::new();
        DEFAULT.get_or_init(|| ReferenceEncoder::new(HogParams::default()))
    }

    pub fn hog_params(&self) -> &HogParams {
        &self.hog
    }

    /// Projection of an already-computed canonical HOG vector.
    pub fn project(&self, hog: &[f64]) -> Result<FaceEncoding, VisionError> {
        if hog.len() != self.input_len {
            return Err(VisionError::InvalidInput(format!(
                "descriptor length {} does not match projection input {}",
                hog.len(),
                self.input_len
            )));
        }
        if hog.iter().all(|&v| v == 0.0) {
            return Err(VisionError::DegenerateFace);
        }
        let out = self
            .projection
            .chunks_exact(self.input_len)
            .map(|row| super::detect::dot(row, hog))
            .collect();
        FaceEncoding::normalized(out)
    }
}

impl FaceEncoder for ReferenceEncoder {
    fn encode(&self, image: &Image, face: &BoundingBox) -> Result<FaceEncoding, VisionError> {
        let hog = compute_hog_at(image, face, CANONICAL_FACE, &self.hog)?;
        self.project(&hog.values)
    }
}

/// Encode one face with the reference encoder for `config`'s HOG layout.
pub fn encode_face(
    image: &Image,
    face: &BoundingBox,
    config: &DetectorConfig,
) -> Result<FaceEncoding, VisionError> {
    if config.hog == HogParams::default() {
        ReferenceEncoder::shared().encode(image, face)
    } else {
        ReferenceEncoder::new(config.hog).encode(image, face)
    }
}
