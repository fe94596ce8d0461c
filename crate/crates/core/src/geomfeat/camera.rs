use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// `focal` pixels with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    #[inline]
    pub fn back_project(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        [(x - self.cx) / self.fx * z, (y - self.cy) / self.fy * z, z]
    }

    #[inline]
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        )
    }

    fn validate(&self, which: &str) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "degenerate {which} intrinsics {self:?}"
            )))
        }
    }
}

/// RGB and depth pinhole cameras, the depth→RGB extrinsics, the stereo
/// baseline used for disparity, and the gravity reference direction.
/// Coordinates are x right, y down, z forward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub rgb: Intrinsics,
    pub depth: Intrinsics,
    /// Row-major rotation taking depth-camera points to the RGB camera.
    pub rotation: [[f64; 3]; 3],
    /// Meters.
    pub translation: [f64; 3],
    /// Meters.
    pub baseline: f64,
    /// Pixels.
    pub disparity_focal: f64,
    /// Unit reference direction for the normal angle.
    pub gravity: [f64; 3],
}

pub const SYNTHETIC_FOCAL: f64 = 500.0;
pub const SYNTHETIC_BASELINE: f64 = 0.05;

impl CameraModel {
    /// fx = fy = 500 px, centered principal points, identity extrinsics,
    /// 5 cm baseline, gravity along the image "up" axis.
    pub fn synthetic(depth_size: (usize, usize), rgb_size: (usize, usize)) -> Self {
        Self {
            rgb: Intrinsics::centered(SYNTHETIC_FOCAL, rgb_size.0, rgb_size.1),
            depth: Intrinsics::centered(SYNTHETIC_FOCAL, depth_size.0, depth_size.1),
            rotation: IDENTITY,
            translation: [0.0; 3],
            baseline: SYNTHETIC_BASELINE,
            disparity_focal: SYNTHETIC_FOCAL,
            gravity: [0.0, -1.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rgb.validate("rgb")?;
        self.depth.validate("depth")?;
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if !((dot - expected).abs() <= 1e-9) {
                    return Err(Error::invalid("rotation is not orthonormal"));
                }
            }
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        if !(self.baseline > 0.0 && self.disparity_focal > 0.0) {
            return Err(Error::invalid("baseline and disparity focal must be > 0"));
        }
        let g = norm(self.gravity);
        if !((g - 1.0).abs() <= 1e-9) {
            return Err(Error::invalid(format!(
                "gravity must be unit-norm, |g| = {g}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn depth_to_rgb(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
        ]
    }
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
