//! Camera frame → 63-feature vector.

use rayon::prelude::*;

use crate::pgm::{GrayImage, RgbImage};
use crate::{Error, Result, Scalar};

pub const GRID_W: usize = 9;
pub const GRID_H: usize = 7;
pub const FEATURES: usize = GRID_W * GRID_H;

/// Rec. 601 luma, rounded to the nearest level.
pub fn to_grayscale(rgb: &RgbImage) -> GrayImage {
    let pixels = rgb
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let y = 0.2989 * p[0] as f64 + 0.5870 * p[1] as f64 + 0.1140 * p[2] as f64;
            y.round().min(255.0) as u8
        })
        .collect();
    GrayImage {
        width: rgb.width,
        height: rgb.height,
        pixels,
    }
}

/// `round(k·len/parts)` with halves rounded up.
fn boundary(k: usize, len: usize, parts: usize) -> usize {
    (2 * k * len + parts) / (2 * parts)
}

/// Mean of each tile of a 9 × 7 partition, scaled to [0, 1], row-major.
pub fn downsample_9x7<T: Scalar>(img: &GrayImage) -> Result<Vec<T>> {
    if img.width < GRID_W || img.height < GRID_H {
        return Err(Error::InvalidParameter(format!(
            "frame {}×{} is smaller than {GRID_W}×{GRID_H}",
            img.width, img.height
        )));
    }
    let mut out = Vec::with_capacity(FEATURES);
    for ty in 0..GRID_H {
        let (r0, r1) = (boundary(ty, img.height, GRID_H), boundary(ty + 1, img.height, GRID_H));
        for tx in 0..GRID_W {
            let (c0, c1) = (boundary(tx, img.width, GRID_W), boundary(tx + 1, img.width, GRID_W));
            let mut sum = 0u64;
            for row in r0..r1 {
                sum += img.pixels[row * img.width + c0..row * img.width + c1]
                    .iter()
                    .map(|&v| v as u64)
                    .sum::<u64>();
            }
            let n = ((r1 - r0) * (c1 - c0)) as f64;
            out.push(T::lit(sum as f64 / (255.0 * n)));
        }
    }
    Ok(out)
}

/// Feature vectors for a batch of frames, in order.
pub fn features<T: Scalar>(frames: &[GrayImage]) -> Result<Vec<Vec<T>>> {
    frames.par_iter().map(downsample_9x7).collect()
}
