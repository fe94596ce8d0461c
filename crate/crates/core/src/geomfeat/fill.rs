use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::frame::DepthFrame;
use crate::grid::Grid;
use crate::noisemap::{RegionLabel, RegionMask};

/// Fills holes inside labeled (non-background) regions.
///
/// Holes are visited in increasing chessboard distance to the nearest
/// originally valid pixel of their own label, ties in scan order. Each gets
/// the Gaussian-weighted mean of the valid same-label pixels in a square
/// window of radius `max(1, ceil(2σ))`, grown one pixel at a time until it
/// contains at least one such pixel. Filled values count as valid for later
/// holes. Background holes stay invalid.
pub fn fill_holes(depth: &DepthFrame, mask: &RegionMask, sigma: f64) -> Result<DepthFrame> {
    depth.depth().check_dims(mask.labels(), "fill_holes mask")?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let (w, h) = (depth.width(), depth.height());

    let mut unfillable = Vec::new();
    let mut distance: Grid<u32> = Grid::filled(w, h, u32::MAX);
    for label in RegionLabel::ALL
        .into_iter()
        .filter(|l| *l != RegionLabel::Background)
    {
        let has_holes =
            (0..h).any(|y| (0..w).any(|x| mask.get(x, y) == label && depth.at(x, y).is_none()));
        if !has_holes {
            continue;
        }
        let dist = label_distance(depth, mask, label);
        match dist {
            Some(dist) => {
                for y in 0..h {
                    for x in 0..w {
                        if mask.get(x, y) == label && depth.at(x, y).is_none() {
                            distance.set(x, y, *dist.get(x, y));
                        }
                    }
                }
            }
            None => unfillable.push(label.name().to_string()),
        }
    }
    if !unfillable.is_empty() {
        return Err(Error::UnfillableRegion(unfillable));
    }

    let mut holes: Vec<(u32, usize)> = distance
        .iter()
        .enumerate()
        .filter(|(_, d)| **d != u32::MAX)
        .map(|(i, d)| (*d, i))
        .collect();
    holes.sort_unstable();

    let mut out = depth.clone();
    let r0 = (2.0 * sigma).ceil().max(1.0) as usize;
    let max_r = w.max(h);
    for (_, i) in holes {
        let (x, y) = (i % w, i / w);
        let label = mask.get(x, y);
        let mut r = r0;
        let value = loop {
            if let Some(v) = window_mean(&out, mask, label, x, y, r, sigma) {
                break v;
            }
            r += 1;
            if r > max_r {
                return Err(Error::UnfillableRegion(vec![label.name().to_string()]));
            }
        };
        out.set(x, y, Some(value));
    }
    Ok(out)
}

/// Gaussian-weighted mean of valid `label` pixels within radius `r`.
pub(crate) fn window_mean(
    depth: &DepthFrame,
    mask: &RegionMask,
    label: RegionLabel,
    x: usize,
    y: usize,
    r: usize,
    sigma: f64,
) -> Option<f64> {
    let x0 = x.saturating_sub(r);
    let y0 = y.saturating_sub(r);
    let x1 = (x + r).min(depth.width() - 1);
    let y1 = (y + r).min(depth.height() - 1);
    let mut pts = Vec::new();
    for yy in y0..=y1 {
        for xx in x0..=x1 {
            if mask.get(xx, yy) != label {
                continue;
            }
            if let Some(d) = depth.at(xx, yy) {
                let dx = xx as f64 - x as f64;
                let dy = yy as f64 - y as f64;
                pts.push((dx * dx + dy * dy, d));
            }
        }
    }
    // exponents are shifted by the nearest sample so far windows cannot underflow
    let nearest = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return None;
    }
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for (r2, d) in pts {
        let wt = (-(r2 - nearest) / (2.0 * sigma * sigma)).exp();
        wsum += wt;
        acc += wt * d;
    }
    Some(acc / wsum)
}

/// Chessboard distance from every pixel to the nearest valid pixel labeled
/// `label`; `None` when there is none.
fn label_distance(depth: &DepthFrame, mask: &RegionMask, label: RegionLabel) -> Option<Grid<u32>> {
    let (w, h) = (depth.width(), depth.height());
    let mut dist = Grid::filled(w, h, u32::MAX);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) == label && depth.at(x, y).is_some() {
                dist.set(x, y, 0);
                queue.push_back((x, y));
            }
        }
    }
    if queue.is_empty() {
        return None;
    }
    while let Some((x, y)) = queue.pop_front() {
        let d = *dist.get(x, y);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if *dist.get(nx, ny) == u32::MAX {
                    dist.set(nx, ny, d + 1);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    Some(dist)
}
