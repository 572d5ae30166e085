//! Histogram of oriented gradients over a fixed 64x64 working resolution.
//!
//! Layout: 8x8-pixel cells, 9 unsigned orientation bins centred on
//! 0°, 20°, ..., 160° with linear vote splitting between adjacent bins,
//! 2x2-cell blocks at a one-cell stride, each block L2-normalized.
//! Output order is block-row, block-column, cell-row, cell-column, bin.

use super::image::ImageGray;

pub const WORKING_SIZE: usize = 64;
pub const CELL_SIZE: usize = 8;
pub const BINS: usize = 9;
pub const BLOCK_CELLS: usize = 2;

const CELLS: usize = WORKING_SIZE / CELL_SIZE;
const BLOCKS: usize = CELLS - BLOCK_CELLS + 1;
const BIN_WIDTH_DEG: f64 = 180.0 / BINS as f64;

/// Length of every HOG descriptor (7x7 blocks of 36 values).
pub const DIMENSION: usize = BLOCKS * BLOCKS * BLOCK_CELLS * BLOCK_CELLS * BINS;

struct Gradients {
    magnitude: Vec<f64>,
    angle_deg: Vec<f64>,
}

fn gradients(img: &ImageGray) -> Gradients {
    let (w, h) = (img.width(), img.height());
    let px = |x: usize, y: usize| img.get(x, y) as f64;
    let mut magnitude = Vec::with_capacity(w * h);
    let mut angle_deg = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let gx = px((x + 1).min(w - 1), y) - px(x.saturating_sub(1), y);
            let gy = px(x, (y + 1).min(h - 1)) - px(x, y.saturating_sub(1));
            magnitude.push(gx.hypot(gy));
            angle_deg.push(unsigned_angle(gx, gy));
        }
    }
    Gradients {
        magnitude,
        angle_deg,
    }
}

/// Gradient direction folded into `[0, 180)`.
fn unsigned_angle(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

fn cell_histograms(grad: &Gradients) -> Vec<[f64; BINS]> {
    let mut cells = vec![[0.0f64; BINS]; CELLS * CELLS];
    let votes = grad.magnitude.iter().zip(&grad.angle_deg).enumerate();
    for (i, (&mag, &angle)) in votes {
        if mag == 0.0 {
            continue;
        }
        let (x, y) = (i % WORKING_SIZE, i / WORKING_SIZE);
        let hist = &mut cells[(y / CELL_SIZE) * CELLS + x / CELL_SIZE];
        let pos = angle / BIN_WIDTH_DEG;
        let lower = pos.floor();
        let frac = pos - lower;
        let lo = lower as usize % BINS;
        hist[lo] += mag * (1.0 - frac);
        hist[(lo + 1) % BINS] += mag * frac;
    }
    cells
}

pub fn compute(img: &ImageGray) -> Vec<f64> {
    let working = img.resize_area(WORKING_SIZE, WORKING_SIZE);
    let cells = cell_histograms(&gradients(&working));

    let mut out = Vec::with_capacity(DIMENSION);
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let start = out.len();
            for cy in by..by + BLOCK_CELLS {
                for cx in bx..bx + BLOCK_CELLS {
                    out.extend_from_slice(&cells[cy * CELLS + cx]);
                }
            }
            let block = &mut out[start..];
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                block.iter_mut().for_each(|v| *v /= norm);
            } else {
                block.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    out
}
