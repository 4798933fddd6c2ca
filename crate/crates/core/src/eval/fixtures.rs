//! Training material for the reference detector, drawn from the glyph corpus.
//!
//! Seeds live in their own ranges so evaluation corpora built from small
//! seeds never overlap the training windows.

use super::glyph::{generate_background, generate_face_glyph, GlyphParams};
use super::EvalError;
use crate::rng::SplitMix64;
use crate::vision::{crop_resize, fit_detector, BoundingBox, DetectorConfig, DetectorModel, Image};

const TRAIN_IDENTITY_BASE: u64 = 0xA000_0000;
const TRAIN_JITTER_BASE: u64 = 0xB000_0000;
const TRAIN_BACKGROUND_BASE: u64 = 0xC000_0000;

/// Square window centred on a face box, side equal to its longer edge,
/// shifted as needed to stay inside a `width` x `height` image.
pub fn face_window(face: &BoundingBox, width: u32, height: u32) -> BoundingBox {
    let side = face.width().max(face.height()).min(width).min(height);
    let (cx, cy) = face.center();
    let place = |c: f64, limit: u32| -> u32 {
        let start = (c - side as f64 / 2.0).round().max(0.0) as u32;
        start.min(limit - side)
    };
    let left = place(cx, width);
    let top = place(cy, height);
    BoundingBox::new(top, left + side, top + side, left)
}

/// Positive face windows and negative windows (textured background plus
/// misaligned face crops), all resized to the detector window.
pub fn training_windows(
    positives: usize,
    negatives: usize,
    config: &DetectorConfig,
) -> Result<(Vec<Image>, Vec<Image>), EvalError> {
    let win = config.window as u32;
    let mut pos = Vec::with_capacity(positives);
    let mut neg = Vec::with_capacity(negatives);
    let mut rng = SplitMix64::new(0x7EA1_17E5);

    for i in 0..positives as u64 {
        let params = GlyphParams::new(TRAIN_IDENTITY_BASE + i, TRAIN_JITTER_BASE + i);
        let (img, face) = generate_face_glyph(&params)?;
        let w = face_window(&face, img.width(), img.height());
        pos.push(crop_resize(&img, &w, win, win)?);
    }

    for i in 0..negatives as u64 {
        if i % 10 < 3 {
            let bg = generate_background(TRAIN_BACKGROUND_BASE + i, 256)?;
            let side = rng.uniform(48.0, 200.0) as u32;
            let left = rng.below((256 - side + 1) as u64) as u32;
            let top = rng.below((256 - side + 1) as u64) as u32;
            neg.push(crop_resize(&bg, &BoundingBox::new(top, left + side, top + side, left), win, win)?);
        } else {
            let params = GlyphParams::new(
                TRAIN_IDENTITY_BASE + 50_000 + i,
                TRAIN_JITTER_BASE + 50_000 + i,
            );
            let (img, face) = generate_face_glyph(&params)?;
            let true_win = face_window(&face, img.width(), img.height());
            if let Some(off) = misaligned(&true_win, img.width(), &mut rng) {
                neg.push(crop_resize(&img, &off, win, win)?);
            }
        }
    }
    Ok((pos, neg))
}

/// A window that overlaps the face poorly: shifted by at least 40% of its
/// side, or scaled well away from the face size.
fn misaligned(face: &BoundingBox, canvas: u32, rng: &mut SplitMix64) -> Option<BoundingBox> {
    let side = face.width() as f64;
    let (cx, cy) = face.center();
    let (scale, shift) = match rng.below(6) {
        0 | 1 => (rng.uniform(0.9, 1.1), rng.uniform(0.35, 0.7)),
        2..=4 => (rng.uniform(0.35, 0.75), rng.uniform(0.0, 0.4)),
        _ => (rng.uniform(1.6, 2.2), rng.uniform(0.0, 0.2)),
    };
    let angle = rng.uniform(0.0, std::f64::consts::TAU);
    let s = (side * scale).round().max(16.0);
    let ncx = cx + angle.cos() * shift * side;
    let ncy = cy + angle.sin() * shift * side;
    let left = (ncx - s / 2.0).round();
    let top = (ncy - s / 2.0).round();
    if left < 0.0 || top < 0.0 || left + s > canvas as f64 || top + s > canvas as f64 {
        return None;
    }
    let (l, t, s) = (left as u32, top as u32, s as u32);
    Some(BoundingBox::new(t, l + s, t + s, l))
}

/// Detector fitted on the glyph training corpus.
pub fn reference_detector(config: &DetectorConfig) -> Result<DetectorModel, EvalError> {
    let (pos, neg) = training_windows(400, 1200, config)?;
    Ok(fit_detector(&pos, &neg, config)?)
}
