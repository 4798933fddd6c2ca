use serde::{Deserialize, Serialize};

use super::encode::FaceEncoding;
use super::VisionError;

/// Default Euclidean match tolerance.
pub const DEFAULT_TOLERANCE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub tolerance: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl MatchConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(tolerance: f64) -> Result<Self, VisionError> {
        if !(tolerance >= 0.0) {
            return Err(VisionError::InvalidConfig(format!(
                "tolerance {tolerance} must be non-negative"
            )));
        }
        Ok(Self { tolerance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Position in the known list.
    pub index: usize,
    pub distance: f64,
    pub matched: bool,
}

/// Best match of a candidate against `(person_id, encoding)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonMatch {
    pub person_id: u64,
    pub index: usize,
    pub distance: f64,
    pub matched: bool,
}

impl PersonMatch {
    pub fn result(&self) -> MatchResult {
        MatchResult {
            index: self.index,
            distance: self.distance,
            matched: self.matched,
        }
    }
}

pub fn face_distance(a: &FaceEncoding, b: &FaceEncoding) -> Result<f64, VisionError> {
    let (a, b) = (a.values(), b.values());
    if a.len() != b.len() {
        return Err(VisionError::InvalidEncoding(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `known[i]` matches when its distance to `candidate` is within tolerance.
pub fn compare_faces(
    known: &[FaceEncoding],
    candidate: &FaceEncoding,
    config: &MatchConfig,
) -> Result<Vec<bool>, VisionError> {
    known
        .iter()
        .map(|k| Ok(face_distance(k, candidate)? <= config.tolerance))
        .collect()
}

/// Closest entry within tolerance; equal distances go to the smaller person id.
pub fn best_match(
    known: &[(u64, FaceEncoding)],
    candidate: &FaceEncoding,
    config: &MatchConfig,
) -> Option<PersonMatch> {
    let mut best: Option<PersonMatch> = None;
    for (index, (person_id, enc)) in known.iter().enumerate() {
        let Ok(distance) = face_distance(enc, candidate) else {
            continue;
        };
        if distance > config.tolerance {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => distance < b.distance || (distance == b.distance && *person_id < b.person_id),
        };
        if better {
            best = Some(PersonMatch {
                person_id: *person_id,
                index,
                distance,
                matched: true,
            });
        }
    }
    best
}
