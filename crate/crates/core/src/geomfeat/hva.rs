use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{DepthFrame, Plane};
use crate::geomfeat::camera::norm;
use crate::geomfeat::CameraModel;
use crate::grid::Grid;
use crate::noisemap::VarianceMap;

/// Horizontal disparity, variance and normal-gravity angle per pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvaChannels {
    /// Pixels.
    pub h: Plane,
    /// m².
    pub v: Plane,
    /// Radians in [0, π].
    pub a: Plane,
}

impl HvaChannels {
    pub fn width(&self) -> usize {
        self.h.width()
    }

    pub fn height(&self) -> usize {
        self.h.height()
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.h, &self.v, &self.a]
    }
}

/// `baseline · focal / depth`; invalid where depth is missing or zero.
pub fn horizontal_disparity(depth: &DepthFrame, cam: &CameraModel) -> Result<Plane> {
    if !(cam.baseline > 0.0 && cam.disparity_focal > 0.0) {
        return Err(Error::invalid("baseline and disparity focal must be > 0"));
    }
    let bf = cam.baseline * cam.disparity_focal;
    let (w, h) = (depth.width(), depth.height());
    let mut values = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if let Some(d) = depth.at(x, y).filter(|d| *d > 0.0) {
                values.set(x, y, bf / d);
                valid.set(x, y, true);
            }
        }
    }
    Plane::new(values, valid)
}

/// Angle between the local surface normal and `cam.gravity`.
///
/// The depth is taken to be registered to the RGB camera, so points are
/// back-projected with the RGB intrinsics. Tangents use central differences,
/// falling back to one-sided differences at borders and holes; a pixel
/// without a neighbor on either axis is invalid. Normals are oriented along
/// the viewing ray (`n · p ≥ 0`), so a fronto-parallel surface has the
/// normal `+z`.
pub fn normal_gravity_angle(depth: &DepthFrame, cam: &CameraModel) -> Result<Plane> {
    let g = cam.gravity;
    let gn = norm(g);
    if !((gn - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!(
            "gravity must be unit-norm, |g| = {gn}"
        )));
    }
    let (w, h) = (depth.width(), depth.height());
    let point = |x: usize, y: usize| -> Option<[f64; 3]> {
        depth
            .at(x, y)
            .filter(|z| *z > 0.0)
            .map(|z| cam.rgb.back_project(x as f64, y as f64, z))
    };
    let tangent =
        |prev: Option<[f64; 3]>, center: [f64; 3], next: Option<[f64; 3]>| match (prev, next) {
            (Some(a), Some(b)) => Some(sub(b, a)),
            (None, Some(b)) => Some(sub(b, center)),
            (Some(a), None) => Some(sub(center, a)),
            (None, None) => None,
        };

    let mut values = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let Some(p) = point(x, y) else { continue };
            let left = (x > 0).then(|| point(x - 1, y)).flatten();
            let right = (x + 1 < w).then(|| point(x + 1, y)).flatten();
            let up = (y > 0).then(|| point(x, y - 1)).flatten();
            let down = (y + 1 < h).then(|| point(x, y + 1)).flatten();
            let (Some(tx), Some(ty)) = (tangent(left, p, right), tangent(up, p, down)) else {
                continue;
            };
            let mut n = cross(tx, ty);
            let len = norm(n);
            if !(len > 0.0) {
                continue;
            }
            n = [n[0] / len, n[1] / len, n[2] / len];
            if dot(n, p) < 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            values.set(x, y, dot(n, g).clamp(-1.0, 1.0).acos());
            valid.set(x, y, true);
        }
    }
    Plane::new(values, valid)
}

/// Stacks disparity, the variance map and the normal angle.
pub fn build_hva(depth: &DepthFrame, cam: &CameraModel, vmap: &VarianceMap) -> Result<HvaChannels> {
    depth
        .depth()
        .check_dims(vmap.values(), "HVA variance map")?;
    Ok(HvaChannels {
        h: horizontal_disparity(depth, cam)?,
        v: Plane::new(vmap.values().clone(), vmap.valid().clone())?,
        a: normal_gravity_angle(depth, cam)?,
    })
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
