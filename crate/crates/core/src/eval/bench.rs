//! Glyph-corpus benchmarks for detection and identity recognition.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::glyph::{generate_background, generate_face_glyph, GlyphParams};
use super::EvalError;
use crate::retrieval::recognize_and_retrieve;
use crate::store::{NewPerson, Store, StoreOptions};
use crate::vision::{
    detect_faces, encode_face, face_distance, iou, DetectorConfig, DetectorModel, FaceEncoding, MatchConfig,
};

/// Identity seeds of evaluation corpora start here; jitter seeds are derived
/// from them, far from the detector's training seeds.
pub const EVAL_JITTER_BASE: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub face_images: usize,
    /// Face images with a detection at IoU >= 0.5 to the ground truth.
    pub hits: usize,
    pub recall: f64,
    pub background_images: usize,
    pub false_positives: usize,
    pub false_positives_per_image: f64,
    pub mean_ms_per_image: f64,
    pub max_ms_per_image: f64,
}

/// Detect on `faces` single-glyph images and `backgrounds` face-free
/// textured images, all 256x256.
pub fn detection_benchmark(
    model: &DetectorModel,
    config: &DetectorConfig,
    faces: usize,
    backgrounds: usize,
) -> Result<DetectionReport, EvalError> {
    let mut hits = 0;
    let mut times = Vec::with_capacity(faces + backgrounds);
    for i in 0..faces as u64 {
        let (img, truth) = generate_face_glyph(&GlyphParams::new(i, EVAL_JITTER_BASE + i))?;
        let start = Instant::now();
        let found = detect_faces(&img, model, config)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        if found.iter().any(|b| iou(b, &truth) >= 0.5) {
            hits += 1;
        }
    }
    let mut false_positives = 0;
    for i in 0..backgrounds as u64 {
        let img = generate_background(5000 + i, 256)?;
        let start = Instant::now();
        false_positives += detect_faces(&img, model, config)?.len();
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(DetectionReport {
        face_images: faces,
        hits,
        recall: hits as f64 / faces.max(1) as f64,
        background_images: backgrounds,
        false_positives,
        false_positives_per_image: false_positives as f64 / backgrounds.max(1) as f64,
        mean_ms_per_image: times.iter().sum::<f64>() / times.len().max(1) as f64,
        max_ms_per_image: times.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identities: usize,
    pub jitters: usize,
    pub enrolled_per_identity: usize,
    /// Enrollment images where no face was detected.
    pub enroll_misses: usize,
    pub probes: usize,
    pub correct: usize,
    pub top1_accuracy: f64,
    pub mean_intra_distance: f64,
    pub mean_inter_distance: f64,
}

/// Enroll the first `enrolled` jitters of each identity through a store,
/// recognize the rest end to end, and measure intra/inter-identity
/// distances over every detected face.
pub fn identity_benchmark(
    model: &DetectorModel,
    config: &DetectorConfig,
    matching: &MatchConfig,
    identities: usize,
    jitters: usize,
    enrolled: usize,
) -> Result<IdentityReport, EvalError> {
    let store = Store::in_memory(StoreOptions::default());
    let mut encodings: Vec<(u64, FaceEncoding)> = Vec::new();
    let mut enroll_misses = 0;
    let mut probes = 0;
    let mut correct = 0;
    for id in 0..identities as u64 {
        let person = store
            .create_person(NewPerson::new(format!("identity {id}")))
            .map_err(|e| EvalError::InvalidParams(e.to_string()))?
            .person_id;
        for j in 0..jitters as u64 {
            let (img, _) = generate_face_glyph(&GlyphParams::new(id, EVAL_JITTER_BASE + 100 * id + j))?;
            let top = detect_faces(&img, model, config)?.into_iter().next();
            let enc = top.and_then(|b| encode_face(&img, &b, config).ok());
            if let Some(e) = &enc {
                encodings.push((id, e.clone()));
            }
            if (j as usize) < enrolled {
                match enc {
                    Some(e) => {
                        store
                            .add_encoding(person, e, None)
                            .map_err(|e| EvalError::InvalidParams(e.to_string()))?;
                    }
                    None => enroll_misses += 1,
                }
            } else {
                probes += 1;
                let outcome = recognize_and_retrieve(&store, &img, model, config, matching)?;
                let hit = outcome
                    .faces
                    .first()
                    .and_then(|f| f.matched)
                    .is_some_and(|m| m.person_id == person);
                if hit {
                    correct += 1;
                }
            }
        }
    }
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..encodings.len() {
        for b in a + 1..encodings.len() {
            let d = face_distance(&encodings[a].1, &encodings[b].1)?;
            if encodings[a].0 == encodings[b].0 {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    Ok(IdentityReport {
        identities,
        jitters,
        enrolled_per_identity: enrolled,
        enroll_misses,
        probes,
        correct,
        top1_accuracy: correct as f64 / probes.max(1) as f64,
        mean_intra_distance: intra / n_intra.max(1) as f64,
        mean_inter_distance: inter / n_inter.max(1) as f64,
    })
}
