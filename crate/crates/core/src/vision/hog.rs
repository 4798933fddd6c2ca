//! Histogram of oriented gradients.
//!
//! Unsigned orientations (0..180 degrees) are voted into `bins` bins whose
//! centres sit at multiples of `180 / bins`, splitting each vote linearly
//! between the two nearest centres. Cells are square, blocks are
//! `block_cells` x `block_cells` cells with a one-cell stride, and each block
//! is L2-Hys normalised.

use serde::{Deserialize, Serialize};

use super::image::{check_region, BoundingBox, Image, Plane};
use super::VisionError;

const L2HYS_CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    pub cell_size: usize,
    pub block_cells: usize,
    pub bins: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cell_size: 8,
            block_cells: 2,
            bins: 9,
        }
    }
}

impl HogParams {
    pub fn block_len(&self) -> usize {
        self.block_cells * self.block_cells * self.bins
    }

    /// Descriptor length for a `width` x `height` raster.
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let cx = width / self.cell_size;
        let cy = height / self.cell_size;
        if cx < self.block_cells || cy < self.block_cells {
            return 0;
        }
        (cx - self.block_cells + 1) * (cy - self.block_cells + 1) * self.block_len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub values: Vec<f64>,
    pub cells_x: usize,
    pub cells_y: usize,
    pub bins: usize,
    pub block_cells: usize,
}

/// Crop `region`, resize it to `window` x `window` and describe it.
pub fn compute_hog_at(
    image: &Image,
    region: &BoundingBox,
    window: usize,
    params: &HogParams,
) -> Result<HogDescriptor, VisionError> {
    check_region(image, region)?;
    let patch = image.to_plane().resample(region, window, window);
    Ok(describe(&patch, params))
}

pub(crate) fn describe(plane: &Plane, params: &HogParams) -> HogDescriptor {
    let cells = CellGrid::compute(plane, params);
    let blocks = BlockGrid::from_cells(&cells, params);
    HogDescriptor {
        values: blocks.data,
        cells_x: cells.cells_x,
        cells_y: cells.cells_y,
        bins: params.bins,
        block_cells: params.block_cells,
    }
}

/// Per-cell orientation histograms over a whole plane.
pub(crate) struct CellGrid {
    pub cells_x: usize,
    pub cells_y: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl CellGrid {
    pub fn compute(plane: &Plane, params: &HogParams) -> Self {
        Self::compute_at(plane, params, 0, 0)
    }

    /// Cell grid whose first cell starts at pixel `(ox, oy)`. Gradients use
    /// the real neighbours across the grid origin; only the plane border is
    /// replicated.
    pub fn compute_at(plane: &Plane, params: &HogParams, ox: usize, oy: usize) -> Self {
        let cs = params.cell_size;
        let bins = params.bins;
        let cells_x = plane.width.saturating_sub(ox) / cs;
        let cells_y = plane.height.saturating_sub(oy) / cs;
        let mut data = vec![0.0; cells_x * cells_y * bins];
        let bin_width = 180.0 / bins as f64;
        let (w, h) = (plane.width, plane.height);

        for y in oy..oy + cells_y * cs {
            let row = &plane.data[y * w..(y + 1) * w];
            let up_y = y.saturating_sub(1);
            let down_y = (y + 1).min(h - 1);
            let up = &plane.data[up_y * w..(up_y + 1) * w];
            let down = &plane.data[down_y * w..(down_y + 1) * w];
            let cy = (y - oy) / cs;
            for x in ox..ox + cells_x * cs {
                let gx = row[(x + 1).min(w - 1)] - row[x.saturating_sub(1)];
                let gy = down[x] - up[x];
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let mut angle = gy.atan2(gx).to_degrees();
                if angle < 0.0 {
                    angle += 180.0;
                }
                if angle >= 180.0 {
                    angle -= 180.0;
                }
                let pos = angle / bin_width;
                let lo = pos.floor();
                let frac = pos - lo;
                let b0 = lo as usize % bins;
                let b1 = (b0 + 1) % bins;
                let base = (cy * cells_x + (x - ox) / cs) * bins;
                data[base + b0] += mag * (1.0 - frac);
                data[base + b1] += mag * frac;
            }
        }
        Self {
            cells_x,
            cells_y,
            bins,
            data,
        }
    }

    fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let base = (cy * self.cells_x + cx) * self.bins;
        &self.data[base..base + self.bins]
    }
}

/// L2-Hys normalised blocks laid out row-major over block positions.
pub(crate) struct BlockGrid {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_len: usize,
    pub data: Vec<f64>,
}

impl BlockGrid {
    pub fn from_cells(cells: &CellGrid, params: &HogParams) -> Self {
        let bc = params.block_cells;
        let block_len = params.block_len();
        if cells.cells_x < bc || cells.cells_y < bc {
            return Self {
                blocks_x: 0,
                blocks_y: 0,
                block_len,
                data: Vec::new(),
            };
        }
        let blocks_x = cells.cells_x - bc + 1;
        let blocks_y = cells.cells_y - bc + 1;
        let mut data = Vec::with_capacity(blocks_x * blocks_y * block_len);
        let mut block = Vec::with_capacity(block_len);
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                block.clear();
                for dy in 0..bc {
                    for dx in 0..bc {
                        block.extend_from_slice(cells.cell(bx + dx, by + dy));
                    }
                }
                l2_hys(&mut block);
                data.extend_from_slice(&block);
            }
        }
        Self {
            blocks_x,
            blocks_y,
            block_len,
            data,
        }
    }

    pub fn block(&self, bx: usize, by: usize) -> &[f64] {
        debug_assert!(bx < self.blocks_x && by < self.blocks_y);
        let base = (by * self.blocks_x + bx) * self.block_len;
        &self.data[base..base + self.block_len]
    }
}

fn l2_hys(v: &mut [f64]) {
    normalize(v);
    for x in v.iter_mut() {
        if *x > L2HYS_CLIP {
            *x = L2HYS_CLIP;
        }
    }
    normalize(v);
}

fn normalize(v: &mut [f64]) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    for x in v.iter_mut() {
        *x = (*x / norm).min(1.0);
    }
}
