use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// 8-bit-range RGB image stored as f64 triples.
pub type RgbImage = Grid<[f64; 3]>;

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub gx: Grid<f64>,
    pub gy: Grid<f64>,
}

pub fn grayscale(rgb: &RgbImage) -> Grid<f64> {
    rgb.map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
}

/// 3×3 Sobel gradients of the luma image, replicating border pixels.
pub fn sobel_gradients(rgb: &RgbImage) -> Result<GradientPair> {
    if rgb.is_empty() {
        return Err(Error::invalid("sobel input is empty"));
    }
    Ok(sobel_gray(&grayscale(rgb)))
}

pub fn sobel_gray(gray: &Grid<f64>) -> GradientPair {
    let (w, h) = gray.dims();
    let px = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        *gray.get(cx, cy)
    };
    let mut gx = Grid::filled(w, h, 0.0);
    let mut gy = Grid::filled(w, h, 0.0);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (px(x + 1, y - 1) - px(x - 1, y - 1))
                + 2.0 * (px(x + 1, y) - px(x - 1, y))
                + (px(x + 1, y + 1) - px(x - 1, y + 1));
            let dy = (px(x - 1, y + 1) - px(x - 1, y - 1))
                + 2.0 * (px(x, y + 1) - px(x, y - 1))
                + (px(x + 1, y + 1) - px(x + 1, y - 1));
            gx.set(x as usize, y as usize, dx);
            gy.set(x as usize, y as usize, dy);
        }
    }
    GradientPair { gx, gy }
}
