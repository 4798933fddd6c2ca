use serde::{Deserialize, Serialize};

use super::VisionError;

/// Sample layout of an [`Image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channels {
    Gray = 1,
    Rgb = 3,
}

impl Channels {
    pub fn count(self) -> usize {
        self as usize
    }
}

/// Row-major 8-bit raster, grayscale or interleaved RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: Channels,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(
        width: u32,
        height: u32,
        channels: Channels,
        pixels: Vec<u8>,
    ) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * channels.count();
        if pixels.len() != expected {
            return Err(VisionError::InvalidImage(format!(
                "expected {expected} samples for {width}x{height}x{}, got {}",
                channels.count(),
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn gray(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, VisionError> {
        Self::new(width, height, Channels::Gray, pixels)
    }

    /// A grayscale image filled with one value.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::gray(width, height, vec![value; width as usize * height as usize])
            .expect("positive dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Grayscale copy; RGB uses `round(0.299 R + 0.587 G + 0.114 B)`.
    pub fn to_gray(&self) -> Image {
        match self.channels {
            Channels::Gray => self.clone(),
            Channels::Rgb => {
                let pixels = self
                    .pixels
                    .chunks_exact(3)
                    .map(|p| luma(p[0], p[1], p[2]))
                    .collect();
                Image {
                    width: self.width,
                    height: self.height,
                    channels: Channels::Gray,
                    pixels,
                }
            }
        }
    }

    pub(crate) fn to_plane(&self) -> Plane {
        let gray = self.to_gray();
        Plane {
            width: gray.width as usize,
            height: gray.height as usize,
            data: gray.pixels.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Whole-image box.
    pub fn bounds(&self) -> BoundingBox {
        BoundingBox {
            top: 0,
            right: self.width,
            bottom: self.height,
            left: 0,
        }
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Face location in pixel coordinates. `right` and `bottom` are exclusive.
///
/// Field order is the serialization order: top, right, bottom, left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
    pub left: u32,
}

impl BoundingBox {
    pub fn new(top: u32, right: u32, bottom: u32, left: u32) -> Self {
        Self {
            top,
            right,
            bottom,
            left,
        }
    }

    pub fn width(&self) -> u32 {
        self.right.saturating_sub(self.left)
    }

    pub fn height(&self) -> u32 {
        self.bottom.saturating_sub(self.top)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_degenerate(&self) -> bool {
        self.top >= self.bottom || self.left >= self.right
    }

    /// True when the box is non-degenerate and lies inside a `width` x `height` raster.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        !self.is_degenerate() && self.right <= width && self.bottom <= height
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.left as f64 + self.right as f64) / 2.0,
            (self.top as f64 + self.bottom as f64) / 2.0,
        )
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let w = self.right.min(other.right).saturating_sub(self.left.max(other.left));
        let h = self.bottom.min(other.bottom).saturating_sub(self.top.max(other.top));
        w as u64 * h as u64
    }
}

/// Floating point grayscale working buffer.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    /// Bilinear resample of `region` to `out_w` x `out_h` using pixel-centre alignment.
    /// Sample positions are clamped to the region, so nothing outside it leaks in.
    pub fn resample(&self, region: &BoundingBox, out_w: usize, out_h: usize) -> Plane {
        let rw = region.width() as f64;
        let rh = region.height() as f64;
        let sx = rw / out_w as f64;
        let sy = rh / out_h as f64;
        let x_lo = region.left as f64;
        let x_hi = (region.right - 1) as f64;
        let y_lo = region.top as f64;
        let y_hi = (region.bottom - 1) as f64;

        let cols: Vec<(usize, usize, f64)> = (0..out_w)
            .map(|x| axis_tap(x_lo + (x as f64 + 0.5) * sx - 0.5, x_lo, x_hi))
            .collect();
        let mut data = Vec::with_capacity(out_w * out_h);
        for y in 0..out_h {
            let (y0, y1, fy) = axis_tap(y_lo + (y as f64 + 0.5) * sy - 0.5, y_lo, y_hi);
            let row0 = &self.data[y0 * self.width..(y0 + 1) * self.width];
            let row1 = &self.data[y1 * self.width..(y1 + 1) * self.width];
            for &(x0, x1, fx) in &cols {
                let top = row0[x0] + (row0[x1] - row0[x0]) * fx;
                let bottom = row1[x0] + (row1[x1] - row1[x0]) * fx;
                data.push(top + (bottom - top) * fy);
            }
        }
        Plane {
            width: out_w,
            height: out_h,
            data,
        }
    }

    pub fn to_image(&self) -> Image {
        let pixels = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        Image::gray(self.width as u32, self.height as u32, pixels).expect("consistent plane")
    }
}

fn axis_tap(pos: f64, lo: f64, hi: f64) -> (usize, usize, f64) {
    let p = pos.clamp(lo, hi);
    let i0 = p.floor();
    let i1 = (i0 + 1.0).min(hi);
    (i0 as usize, i1 as usize, p - i0)
}

/// Crop `region` and bilinearly resize it to `out_w` x `out_h` (grayscale).
pub fn crop_resize(
    image: &Image,
    region: &BoundingBox,
    out_w: u32,
    out_h: u32,
) -> Result<Image, VisionError> {
    check_region(image, region)?;
    Ok(image
        .to_plane()
        .resample(region, out_w as usize, out_h as usize)
        .to_image())
}

pub(crate) fn check_region(image: &Image, region: &BoundingBox) -> Result<(), VisionError> {
    if region.is_degenerate() {
        return Err(VisionError::InvalidRegion(format!(
            "degenerate region {region:?}"
        )));
    }
    if !region.fits(image.width(), image.height()) {
        return Err(VisionError::InvalidRegion(format!(
            "region {region:?} exceeds {}x{} image",
            image.width(),
            image.height()
        )));
    }
    Ok(())
}
