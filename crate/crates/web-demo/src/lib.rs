//! Browser demo over the recognition core. The [`Demo`] methods are plain
//! Rust and testable natively; [`wasm`] exposes them to JavaScript.

use mfrs_core::eval::{generate_face_glyph, reference_detector, GlyphParams, EVAL_JITTER_BASE};
use mfrs_core::ingestion::{framing_check, load_image, FramingPolicy, FramingReport};
use mfrs_core::memo::{noise_gate, read_wav, rms, write_wav, GatePolicy};
use mfrs_core::vision::{
    detect_faces, encode_face, face_distance, BoundingBox, Channels, DetectorConfig, DetectorModel, Image,
    DEFAULT_TOLERANCE,
};
use serde::Serialize;

pub mod wasm;

/// Canvas edge of the rendered glyph portraits.
pub const GLYPH_CANVAS: u32 = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub face_a: Option<BoundingBox>,
    pub face_b: Option<BoundingBox>,
    /// Absent when either portrait has no detected face.
    pub distance: Option<f64>,
    pub tolerance: f64,
    pub same_person: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSummary {
    pub duration_s: f64,
    pub rms_in_dbfs: f64,
    pub rms_out_dbfs: f64,
    /// Canonical 16 kHz mono WAV of the gated clip.
    #[serde(skip)]
    pub wav: Vec<u8>,
}

pub struct Demo {
    model: DetectorModel,
    detector: DetectorConfig,
    framing: FramingPolicy,
}

fn glyph(identity: u64, variant: u64) -> Result<Image, String> {
    let params = GlyphParams::new(identity, EVAL_JITTER_BASE + 100 * identity + variant)
        .canvas(GLYPH_CANVAS)
        .placed((0.5, 0.5), 0.45);
    generate_face_glyph(&params).map(|(img, _)| img).map_err(|e| e.to_string())
}

fn dbfs(level: f64) -> f64 {
    20.0 * (level.max(1e-9) / 32767.0).log10()
}

/// Grayscale or RGB pixels widened to canvas RGBA.
pub fn to_rgba(image: &Image) -> Vec<u8> {
    let px = image.pixels();
    match image.channels() {
        Channels::Gray => px.iter().flat_map(|&v| [v, v, v, 255]).collect(),
        Channels::Rgb => px.chunks(3).flat_map(|c| [c[0], c[1], c[2], 255]).collect(),
    }
}

impl Demo {
    /// Load a serialized detector, or train the reference one when absent.
    pub fn new(model_bytes: Option<&[u8]>) -> Result<Self, String> {
        let detector = DetectorConfig::default();
        let model = match model_bytes {
            Some(bytes) => DetectorModel::from_bytes(bytes).map_err(|e| e.to_string())?,
            None => reference_detector(&detector).map_err(|e| e.to_string())?,
        };
        model.check(&detector).map_err(|e| e.to_string())?;
        Ok(Self {
            model,
            detector,
            framing: FramingPolicy::default(),
        })
    }

    pub fn model_bytes(&self) -> Vec<u8> {
        self.model.to_bytes()
    }

    /// RGBA pixels of a glyph portrait, `GLYPH_CANVAS` square.
    pub fn render_glyph(&self, identity: u64, variant: u64) -> Result<Vec<u8>, String> {
        Ok(to_rgba(&glyph(identity, variant)?))
    }

    fn first_encoding(&self, image: &Image) -> Result<Option<(BoundingBox, mfrs_core::vision::FaceEncoding)>, String> {
        let faces = detect_faces(image, &self.model, &self.detector).map_err(|e| e.to_string())?;
        let Some(face) = faces.first().copied() else {
            return Ok(None);
        };
        let enc = encode_face(image, &face, &self.detector).map_err(|e| e.to_string())?;
        Ok(Some((face, enc)))
    }

    /// Detect, encode and compare two glyph portraits.
    pub fn compare_glyphs(&self, a: (u64, u64), b: (u64, u64)) -> Result<Comparison, String> {
        let ea = self.first_encoding(&glyph(a.0, a.1)?)?;
        let eb = self.first_encoding(&glyph(b.0, b.1)?)?;
        let distance = match (&ea, &eb) {
            (Some((_, x)), Some((_, y))) => Some(face_distance(x, y).map_err(|e| e.to_string())?),
            _ => None,
        };
        Ok(Comparison {
            face_a: ea.map(|e| e.0),
            face_b: eb.map(|e| e.0),
            distance,
            tolerance: DEFAULT_TOLERANCE,
            same_person: distance.is_some_and(|d| d <= DEFAULT_TOLERANCE),
        })
    }

    /// Framing feedback for an uploaded PGM, PPM or PNG.
    pub fn check_framing(&self, bytes: &[u8]) -> Result<FramingReport, String> {
        let image = load_image(bytes).map_err(|e| e.to_string())?;
        framing_check(&image, &self.model, &self.detector, &self.framing).map_err(|e| e.to_string())
    }
}

/// Noise-gate an uploaded 16 kHz mono 16-bit WAV.
pub fn gate_wav(bytes: &[u8]) -> Result<GateSummary, String> {
    let clip = read_wav(bytes).map_err(|e| e.to_string())?;
    let gated = noise_gate(&clip, &GatePolicy::default()).map_err(|e| e.to_string())?;
    Ok(GateSummary {
        duration_s: clip.duration_s(),
        rms_in_dbfs: dbfs(rms(clip.samples())),
        rms_out_dbfs: dbfs(rms(gated.samples())),
        wav: write_wav(&gated),
    })
}
