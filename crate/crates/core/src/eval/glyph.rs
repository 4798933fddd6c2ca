//! Procedural face glyphs with exact ground truth.
//!
//! An identity seed fixes the face geometry (head aspect, eye placement and
//! size, brows, nose, mouth shape, hairline). A jitter seed fixes everything
//! that varies between photos of the same identity: placement, size, small
//! in-plane tilt, brightness and the textured background.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::SplitMix64;
use crate::vision::{BoundingBox, Image};

pub const MIN_CANVAS: u32 = 96;

/// Ranges sampled from the jitter seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Face height as a fraction of the canvas side, `(min, max)`.
    pub height_frac: (f64, f64),
    /// Largest absolute in-plane tilt in degrees.
    pub tilt_deg: f64,
    /// Largest absolute brightness offset applied to the whole face.
    pub brightness: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            height_frac: (0.32, 0.55),
            tilt_deg: 4.0,
            brightness: 25.0,
        }
    }
}

/// Fixed placement, overriding the sampled position and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Face centre as fractions of the canvas side.
    pub center: (f64, f64),
    /// Face height as a fraction of the canvas side.
    pub height_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlyphParams {
    pub seed: u64,
    pub identity_seed: u64,
    pub jitter: Jitter,
    /// Side of the square canvas in pixels.
    pub canvas: u32,
    pub placement: Option<Placement>,
}

impl GlyphParams {
    pub fn new(identity_seed: u64, seed: u64) -> Self {
        Self {
            seed,
            identity_seed,
            jitter: Jitter::default(),
            canvas: 256,
            placement: None,
        }
    }

    pub fn canvas(mut self, canvas: u32) -> Self {
        self.canvas = canvas;
        self
    }

    pub fn placed(mut self, center: (f64, f64), height_frac: f64) -> Self {
        self.placement = Some(Placement {
            center,
            height_frac,
        });
        self
    }
}

/// Geometry shared by every glyph of one identity, in head-normalised units.
#[derive(Debug, Clone, Copy)]
struct Identity {
    aspect: f64,
    eye_y: f64,
    eye_dx: f64,
    eye_rx: f64,
    eye_ry: f64,
    brow_gap: f64,
    brow_tilt: f64,
    brow_len: f64,
    nose_len: f64,
    nose_w: f64,
    mouth_y: f64,
    mouth_w: f64,
    mouth_curve: f64,
    hairline: f64,
    feature_depth: f64,
}

impl Identity {
    fn from_seed(seed: u64) -> Self {
        // Salted so identity and jitter streams never coincide for equal seeds.
        let mut r = SplitMix64::new(seed ^ 0x1D_E7_17_7F_AC_E5_EE_D5);
        Self {
            aspect: r.uniform(0.74, 0.92),
            eye_y: r.uniform(-0.32, -0.06),
            eye_dx: r.uniform(0.26, 0.50),
            eye_rx: r.uniform(0.09, 0.20),
            eye_ry: r.uniform(0.05, 0.11),
            brow_gap: r.uniform(0.10, 0.22),
            brow_tilt: r.uniform(-0.25, 0.25),
            brow_len: r.uniform(0.8, 1.6),
            nose_len: r.uniform(0.12, 0.34),
            nose_w: r.uniform(0.03, 0.08),
            mouth_y: r.uniform(0.34, 0.62),
            mouth_w: r.uniform(0.20, 0.52),
            mouth_curve: r.uniform(-0.16, 0.16),
            hairline: r.uniform(-0.88, -0.45),
            feature_depth: r.uniform(70.0, 120.0),
        }
    }

    /// Darkening at head-normalised `(u, v)`; `None` outside the head.
    fn shade(&self, u: f64, v: f64) -> Option<f64> {
        if u * u + v * v > 1.0 {
            return None;
        }
        let d = self.feature_depth;
        if v < self.hairline {
            return Some(d * 0.8);
        }
        for side in [-1.0, 1.0] {
            let ex = (u - side * self.eye_dx) / self.eye_rx;
            let ey = (v - self.eye_y) / self.eye_ry;
            if ex * ex + ey * ey <= 1.0 {
                return Some(d);
            }
            let bu = u - side * self.eye_dx;
            if bu.abs() <= self.eye_rx * self.brow_len {
                let by = self.eye_y - self.brow_gap + side * self.brow_tilt * bu;
                if (v - by).abs() <= 0.025 {
                    return Some(d * 0.9);
                }
            }
        }
        let nose_top = self.eye_y + 0.08;
        if u.abs() <= self.nose_w && v >= nose_top && v <= nose_top + self.nose_len {
            return Some(d * 0.5);
        }
        if u.abs() <= self.mouth_w {
            let t = u / self.mouth_w;
            let curve = self.mouth_y + self.mouth_curve * (1.0 - t * t);
            if (v - curve).abs() <= 0.035 {
                return Some(d);
            }
        }
        Some(0.0)
    }
}

/// Render one glyph and its exact ground-truth box (tight bounds of the head).
pub fn generate_face_glyph(params: &GlyphParams) -> Result<(Image, BoundingBox), EvalError> {
    let canvas = params.canvas;
    if canvas < MIN_CANVAS {
        return Err(EvalError::InvalidParams(format!(
            "canvas {canvas} below minimum {MIN_CANVAS}"
        )));
    }
    let (lo, hi) = params.jitter.height_frac;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(EvalError::InvalidParams(format!(
            "height fraction range ({lo}, {hi}) must lie in (0, 1]"
        )));
    }
    let id = Identity::from_seed(params.identity_seed);
    let mut rng = SplitMix64::new(params.seed);
    let side = canvas as f64;

    let mut pixels = background(&mut rng, canvas);

    let height_frac = match params.placement {
        Some(p) => p.height_frac,
        None => rng.uniform(lo, hi),
    };
    let head_h = (height_frac * side).max(8.0);
    let b = head_h / 2.0;
    let a = b * id.aspect;
    let tilt = rng.uniform(-params.jitter.tilt_deg, params.jitter.tilt_deg).to_radians();
    let (sin, cos) = tilt.sin_cos();
    let half_w = (a * a * cos * cos + b * b * sin * sin).sqrt();
    let half_h = (a * a * sin * sin + b * b * cos * cos).sqrt();
    let (cx, cy) = match params.placement {
        Some(p) => (p.center.0 * side, p.center.1 * side),
        None => (
            rng.uniform(half_w + 1.0, (side - half_w - 1.0).max(half_w + 1.0)),
            rng.uniform(half_h + 1.0, (side - half_h - 1.0).max(half_h + 1.0)),
        ),
    };
    let skin = rng.uniform(165.0, 215.0) + rng.uniform(-1.0, 1.0) * params.jitter.brightness;

    let left = (cx - half_w).floor().max(0.0) as u32;
    let top = (cy - half_h).floor().max(0.0) as u32;
    let right = ((cx + half_w).ceil() as u32).min(canvas);
    let bottom = ((cy + half_h).ceil() as u32).min(canvas);
    if left >= right || top >= bottom {
        return Err(EvalError::InvalidParams("face falls outside the canvas".into()));
    }

    const SUB: [f64; 2] = [0.25, 0.75];
    for y in top..bottom {
        for x in left..right {
            let mut acc = 0.0;
            let mut hits = 0;
            for sy in SUB {
                for sx in SUB {
                    let dx = x as f64 + sx - cx;
                    let dy = y as f64 + sy - cy;
                    let u = (dx * cos + dy * sin) / a;
                    let v = (-dx * sin + dy * cos) / b;
                    if let Some(dark) = id.shade(u, v) {
                        acc += skin - dark;
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let idx = (y * canvas + x) as usize;
                let bg = pixels[idx] as f64;
                let v = (acc + bg * (4 - hits) as f64) / 4.0;
                pixels[idx] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }

    let image = Image::gray(canvas, canvas, pixels).expect("canvas buffer");
    Ok((image, BoundingBox::new(top, right, bottom, left)))
}

/// Face-free textured canvas drawn from the same background model.
pub fn generate_background(seed: u64, canvas: u32) -> Result<Image, EvalError> {
    if canvas < MIN_CANVAS {
        return Err(EvalError::InvalidParams(format!(
            "canvas {canvas} below minimum {MIN_CANVAS}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    Ok(Image::gray(canvas, canvas, background(&mut rng, canvas)).expect("canvas buffer"))
}

/// Smooth value noise on a 16 px lattice plus fine grain.
fn background(rng: &mut SplitMix64, canvas: u32) -> Vec<u8> {
    const LATTICE: u32 = 16;
    let base = rng.uniform(50.0, 130.0);
    let amp = rng.uniform(10.0, 30.0);
    let n = (canvas / LATTICE + 2) as usize;
    let grid: Vec<f64> = (0..n * n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let mut out = Vec::with_capacity((canvas * canvas) as usize);
    for y in 0..canvas {
        let gy = y as f64 / LATTICE as f64;
        let (iy, fy) = (gy.floor() as usize, smooth(gy.fract()));
        for x in 0..canvas {
            let gx = x as f64 / LATTICE as f64;
            let (ix, fx) = (gx.floor() as usize, smooth(gx.fract()));
            let g = |i: usize, j: usize| grid[j * n + i];
            let top = g(ix, iy) + (g(ix + 1, iy) - g(ix, iy)) * fx;
            let bot = g(ix, iy + 1) + (g(ix + 1, iy + 1) - g(ix, iy + 1)) * fx;
            let smooth_val = top + (bot - top) * fy;
            let grain = rng.uniform(-6.0, 6.0);
            out.push((base + amp * smooth_val + grain).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}
