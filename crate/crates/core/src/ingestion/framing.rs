use serde::{Deserialize, Serialize};

use crate::vision::{detect_faces, BoundingBox, DetectorConfig, DetectorModel, Image, VisionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FramingPolicy {
    /// Minimum face height as a fraction of the image height.
    pub min_size_ratio: f64,
    /// Maximum per-axis centre offset, normalised to [0, 1].
    pub max_center_offset: f64,
    /// Minimum Laplacian variance of the face crop (0-255 pixel scale).
    pub min_sharpness: f64,
}

impl Default for FramingPolicy {
    fn default() -> Self {
        Self {
            min_size_ratio: 0.20,
            max_center_offset: 0.25,
            min_sharpness: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FramingFailure {
    NoFace,
    MultipleFaces,
    TooSmall,
    OffCenter,
    Blurry,
}

impl FramingFailure {
    /// Failures an operator may waive; missing or ambiguous faces are never waivable.
    pub fn is_quality(self) -> bool {
        matches!(self, Self::TooSmall | Self::OffCenter | Self::Blurry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingReport {
    pub pass: bool,
    pub face: Option<BoundingBox>,
    /// Sorted, without duplicates.
    pub failures: Vec<FramingFailure>,
    pub size_ratio: Option<f64>,
    pub center_offset: Option<f64>,
    pub sharpness: Option<f64>,
}

impl FramingReport {
    /// True when every failure is a waivable quality failure.
    pub fn waivable(&self) -> bool {
        self.failures.iter().all(|f| f.is_quality())
    }
}

/// Face height over image height.
pub fn size_ratio(face: &BoundingBox, image_height: u32) -> f64 {
    face.height() as f64 / image_height as f64
}

/// Larger of the two per-axis distances between face and image centres,
/// each normalised by the half-extent of the image.
pub fn center_offset(face: &BoundingBox, width: u32, height: u32) -> f64 {
    let (cx, cy) = face.center();
    let (hw, hh) = (width as f64 / 2.0, height as f64 / 2.0);
    ((cx - hw).abs() / hw).max((cy - hh).abs() / hh).min(1.0)
}

/// Variance of the 4-neighbour Laplacian over the interior of the crop.
pub fn laplacian_variance(image: &Image, region: &BoundingBox) -> f64 {
    let gray = image.to_gray();
    let w = gray.width() as usize;
    let px = gray.pixels();
    let (l, r, t, b) = (
        region.left as usize,
        region.right as usize,
        region.top as usize,
        region.bottom as usize,
    );
    if r - l < 3 || b - t < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0.0;
    for y in t + 1..b - 1 {
        for x in l + 1..r - 1 {
            let c = px[y * w + x] as f64;
            let lap = px[y * w + x - 1] as f64
                + px[y * w + x + 1] as f64
                + px[(y - 1) * w + x] as f64
                + px[(y + 1) * w + x] as f64
                - 4.0 * c;
            sum += lap;
            sum_sq += lap * lap;
            n += 1.0;
        }
    }
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

/// Detect faces and judge whether the capture is a usable enrollment photo.
pub fn framing_check(
    image: &Image,
    model: &DetectorModel,
    config: &DetectorConfig,
    policy: &FramingPolicy,
) -> Result<FramingReport, VisionError> {
    let faces = detect_faces(image, model, config)?;
    Ok(judge(image, &faces, policy))
}

/// Framing verdict for an already-detected face list (highest score first).
pub fn judge(image: &Image, faces: &[BoundingBox], policy: &FramingPolicy) -> FramingReport {
    let Some(face) = faces.first().copied() else {
        return FramingReport {
            pass: false,
            face: None,
            failures: vec![FramingFailure::NoFace],
            size_ratio: None,
            center_offset: None,
            sharpness: None,
        };
    };
    let size = size_ratio(&face, image.height());
    let offset = center_offset(&face, image.width(), image.height());
    let sharpness = laplacian_variance(image, &face);

    let mut failures = Vec::new();
    if faces.len() > 1 {
        failures.push(FramingFailure::MultipleFaces);
    }
    if size < policy.min_size_ratio {
        failures.push(FramingFailure::TooSmall);
    }
    if offset > policy.max_center_offset {
        failures.push(FramingFailure::OffCenter);
    }
    if sharpness < policy.min_sharpness {
        failures.push(FramingFailure::Blurry);
    }
    failures.sort();
    FramingReport {
        pass: failures.is_empty(),
        face: Some(face),
        failures,
        size_ratio: Some(size),
        center_offset: Some(offset),
        sharpness: Some(sharpness),
    }
}
