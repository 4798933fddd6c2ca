//! Sliding-window face detection over an image pyramid with a linear HOG scorer.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::hog::{compute_hog_at, describe, BlockGrid, CellGrid, HogDescriptor, HogParams};
use super::image::{BoundingBox, Image, Plane};
use super::VisionError;

const MODEL_MAGIC: &[u8; 8] = b"MFRSDET1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Side of the square detection window, in pixels.
    pub window: usize,
    pub stride: usize,
    pub pyramid_scale: f64,
    pub score_threshold: f64,
    pub nms_iou: f64,
    pub hog: HogParams,
    /// Smallest face side, in original-image pixels, worth scanning for.
    pub min_face: usize,
    /// Re-centre each surviving box on the local score maximum.
    pub refine: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 64,
            stride: 8,
            pyramid_scale: 1.2,
            score_threshold: 0.0,
            nms_iou: 0.3,
            hog: HogParams::default(),
            min_face: 64,
            refine: true,
        }
    }
}

impl DetectorConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), VisionError> {
        let bad = |msg: String| Err(VisionError::InvalidConfig(msg));
        if self.hog.cell_size == 0 || self.hog.bins == 0 || self.hog.block_cells == 0 {
            return bad("hog cell size, block size and bin count must be positive".into());
        }
        if self.window == 0 || !self.window.is_multiple_of(self.hog.cell_size) {
            return bad(format!(
                "window {} is not a multiple of cell size {}",
                self.window, self.hog.cell_size
            ));
        }
        if self.window / self.hog.cell_size < self.hog.block_cells {
            return bad("window smaller than one block".into());
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.pyramid_scale > 1.0) {
            return bad(format!("pyramid scale {} must exceed 1", self.pyramid_scale));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return bad(format!("nms_iou {} outside (0, 1)", self.nms_iou));
        }
        Ok(())
    }

    /// Length of the HOG descriptor of one detection window.
    pub fn descriptor_len(&self) -> usize {
        self.hog.descriptor_len(self.window, self.window)
    }
}

/// Linear scorer `weights · hog + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    weights: Vec<f64>,
    bias: f64,
}

impl DetectorModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn check(&self, config: &DetectorConfig) -> Result<(), VisionError> {
        let expected = config.descriptor_len();
        if self.weights.len() != expected {
            return Err(VisionError::ModelMismatch {
                expected,
                actual: self.weights.len(),
            });
        }
        Ok(())
    }

    pub fn score(&self, descriptor: &HogDescriptor) -> f64 {
        dot(&self.weights, &descriptor.values) + self.bias
    }

    /// `MFRSDET1`, u32 LE weight count, weights as f64 LE, bias as f64 LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 + 8 * (self.weights.len() + 1));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.bias.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        let bad = |msg: &str| VisionError::ModelFormat(msg.to_string());
        if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
            return Err(bad("missing MFRSDET1 magic"));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != 8 * (n + 1) {
            return Err(bad(&format!(
                "expected {} bytes of weights and bias, found {}",
                8 * (n + 1),
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let weights: Vec<f64> = values.by_ref().take(n).collect();
        let bias = values.next().ok_or_else(|| bad("missing bias"))?;
        Ok(Self { weights, bias })
    }
}

/// HOG descriptor of `region`, resized to the configured window.
pub fn compute_hog(
    image: &Image,
    region: &BoundingBox,
    config: &DetectorConfig,
) -> Result<HogDescriptor, VisionError> {
    compute_hog_at(image, region, config.window, &config.hog)
}

/// Mean-difference linear model: `w = mean(pos) - mean(neg)` with the bias
/// placing the two class means symmetrically around zero.
pub fn fit_detector(
    positives: &[Image],
    negatives: &[Image],
    config: &DetectorConfig,
) -> Result<DetectorModel, VisionError> {
    config.validate()?;
    if positives.is_empty() || negatives.is_empty() {
        return Err(VisionError::EmptyTrainingSet);
    }
    let mean_pos = mean_descriptor(positives, config)?;
    let mean_neg = mean_descriptor(negatives, config)?;
    let weights: Vec<f64> = mean_pos.iter().zip(&mean_neg).map(|(p, n)| p - n).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(VisionError::DegenerateModel);
    }
    let bias = -(dot(&weights, &mean_pos) + dot(&weights, &mean_neg)) / 2.0;
    Ok(DetectorModel { weights, bias })
}

fn mean_descriptor(images: &[Image], config: &DetectorConfig) -> Result<Vec<f64>, VisionError> {
    let mut acc = vec![0.0; config.descriptor_len()];
    for img in images {
        let d = compute_hog(img, &img.bounds(), config)?;
        for (a, v) in acc.iter_mut().zip(&d.values) {
            *a += v;
        }
    }
    let n = images.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Face boxes in the original image's coordinates, highest score first.
pub fn detect_faces(
    image: &Image,
    model: &DetectorModel,
    config: &DetectorConfig,
) -> Result<Vec<BoundingBox>, VisionError> {
    Ok(detect_scored(image, model, config)?
        .into_iter()
        .map(|d| d.bbox)
        .collect())
}

/// [`detect_faces`] keeping the window scores.
pub fn detect_scored(
    image: &Image,
    model: &DetectorModel,
    config: &DetectorConfig,
) -> Result<Vec<Detection>, VisionError> {
    config.validate()?;
    model.check(config)?;
    let (width, height) = (image.width() as usize, image.height() as usize);
    if width < config.window || height < config.window {
        return Ok(Vec::new());
    }

    let base = image.to_plane();
    let mut candidates = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let lw = (width as f64 / scale).floor() as usize;
        let lh = (height as f64 / scale).floor() as usize;
        if lw < config.window || lh < config.window {
            break;
        }
        if (config.window as f64 * scale).round() as usize >= config.min_face {
            let level = if lw == width && lh == height {
                base.clone()
            } else {
                base.resample(&image.bounds(), lw, lh)
            };
            scan_level(&level, scale, width, height, model, config, &mut candidates);
        }
        scale *= config.pyramid_scale;
    }

    let mut kept = suppress(&candidates, config.nms_iou);
    if config.refine {
        let refined: Vec<Detection> = kept.iter().map(|d| refine(&base, d, model, config)).collect();
        kept = suppress(&refined, config.nms_iou);
    }
    Ok(kept)
}

fn suppress(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let boxes: Vec<BoundingBox> = detections.iter().map(|d| d.bbox).collect();
    let scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    nms_indices(&boxes, &scores, iou_threshold)
        .into_iter()
        .map(|i| detections[i])
        .collect()
}

const REFINE_SCALE_STEP: f64 = 0.04;
const REFINE_SCALE_STEPS: i32 = 3;
const REFINE_SHIFT_STEP: f64 = 0.025;
const REFINE_SHIFT_STEPS: i32 = 4;

/// Hill climb around a pyramid hit over a grid of box sides (up to +-12%)
/// and centres (up to +-10% of the side), keeping the best-scoring box. The
/// pyramid grid alone leaves boxes several pixels and up to ~10% in scale off,
/// which is enough to scramble a 128x128 HOG encoding of the crop.
fn refine(base: &Plane, hit: &Detection, model: &DetectorModel, config: &DetectorConfig) -> Detection {
    let (width, height) = (base.width as f64, base.height as f64);
    let side = hit.bbox.width() as f64;
    let (cx, cy) = hit.bbox.center();
    let mut seen: HashMap<(i32, i32, i32), Option<Detection>> = HashMap::new();
    let mut evaluate = |k: i32, dx: i32, dy: i32| -> Option<Detection> {
        *seen.entry((k, dx, dy)).or_insert_with(|| {
            let s = (side * (1.0 + REFINE_SCALE_STEP * k as f64)).round();
            let left = (cx + dx as f64 * REFINE_SHIFT_STEP * side - s / 2.0).round();
            let top = (cy + dy as f64 * REFINE_SHIFT_STEP * side - s / 2.0).round();
            if s < 2.0 || left < 0.0 || top < 0.0 || left + s > width || top + s > height {
                return None;
            }
            let (l, t, s) = (left as u32, top as u32, s as u32);
            let bbox = BoundingBox::new(t, l + s, t + s, l);
            let patch = base.resample(&bbox, config.window, config.window);
            Some(Detection {
                bbox,
                score: model.score(&describe(&patch, &config.hog)),
            })
        })
    };

    let mut best = *hit;
    let mut at: (i32, i32, i32) = (0, 0, 0);
    loop {
        let mut next = None;
        for k in at.0 - 1..=at.0 + 1 {
            for dy in at.2 - 1..=at.2 + 1 {
                for dx in at.1 - 1..=at.1 + 1 {
                    if k.abs() > REFINE_SCALE_STEPS
                        || dx.abs() > REFINE_SHIFT_STEPS
                        || dy.abs() > REFINE_SHIFT_STEPS
                    {
                        continue;
                    }
                    if let Some(d) = evaluate(k, dx, dy) {
                        if d.score > best.score {
                            best = d;
                            next = Some((k, dx, dy));
                        }
                    }
                }
            }
        }
        match next {
            Some(p) => at = p,
            None => return best,
        }
    }
}

fn scan_level(
    level: &Plane,
    scale: f64,
    width: usize,
    height: usize,
    model: &DetectorModel,
    config: &DetectorConfig,
    out: &mut Vec<Detection>,
) {
    let win = config.window;
    let cs = config.hog.cell_size;
    let to_box = |x: usize, y: usize| {
        let left = ((x as f64 * scale).round() as usize).min(width - 1);
        let top = ((y as f64 * scale).round() as usize).min(height - 1);
        let side = ((win as f64 * scale).round() as usize).max(1);
        BoundingBox::new(
            top as u32,
            (left + side).min(width) as u32,
            (top + side).min(height) as u32,
            left as u32,
        )
    };
    let per_axis = win / cs - config.hog.block_cells + 1;
    let block_len = config.hog.block_len();
    // Normalised blocks are shared by every window with the same phase
    // relative to the cell grid, so each phase is described once per level.
    let mut grids: HashMap<(usize, usize), BlockGrid> = HashMap::new();
    for y in (0..=level.height - win).step_by(config.stride) {
        for x in (0..=level.width - win).step_by(config.stride) {
            let phase = (x % cs, y % cs);
            let blocks = grids.entry(phase).or_insert_with(|| {
                let cells = CellGrid::compute_at(level, &config.hog, phase.0, phase.1);
                BlockGrid::from_cells(&cells, &config.hog)
            });
            let (bx0, by0) = (x / cs, y / cs);
            let mut score = model.bias;
            for j in 0..per_axis {
                for i in 0..per_axis {
                    let w0 = (j * per_axis + i) * block_len;
                    score += dot(
                        &model.weights[w0..w0 + block_len],
                        blocks.block(bx0 + i, by0 + j),
                    );
                }
            }
            if score > config.score_threshold {
                out.push(Detection {
                    bbox: to_box(x, y),
                    score,
                });
            }
        }
    }
}

/// Intersection over union; 0 for disjoint or empty boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Greedy non-maximum suppression. Equal scores are ordered by `(top, left)`.
pub fn nms(
    boxes: &[BoundingBox],
    scores: &[f64],
    iou_threshold: f64,
) -> Result<Vec<BoundingBox>, VisionError> {
    if boxes.len() != scores.len() {
        return Err(VisionError::InvalidInput(format!(
            "{} boxes but {} scores",
            boxes.len(),
            scores.len()
        )));
    }
    Ok(nms_indices(boxes, scores, iou_threshold)
        .into_iter()
        .map(|i| boxes[i])
        .collect())
}

fn nms_indices(boxes: &[BoundingBox], scores: &[f64], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| rank(boxes, scores, a, b));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep
            .iter()
            .all(|&k| iou(&boxes[k], &boxes[i]) <= iou_threshold)
        {
            keep.push(i);
        }
    }
    keep
}

fn rank(boxes: &[BoundingBox], scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| (boxes[a].top, boxes[a].left).cmp(&(boxes[b].top, boxes[b].left)))
        .then_with(|| a.cmp(&b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
