use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomfeat::GradientPair;
use crate::grid::Grid;
use crate::noisemap::RegionMask;

/// Hair strand direction classes; the discriminant is the on-disk class id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum DirectionClass {
    Horizontal = 0,
    Longitudinal = 1,
    Leftward = 2,
    Rightward = 3,
}

impl DirectionClass {
    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Id written for pixels that carry no direction.
pub const NO_DIRECTION: u8 = 255;

/// Maps an image-plane angle in degrees, `[0, 180)`, to its class.
///
/// `[0, 22.5) ∪ [157.5, 180)` horizontal, `[22.5, 80)` leftward,
/// `[80, 110]` longitudinal, `(110, 157.5)` rightward.
pub fn quantize_direction(angle: f64) -> Result<DirectionClass> {
    if !(0.0..180.0).contains(&angle) {
        return Err(Error::invalid(format!(
            "direction angle {angle} is outside [0, 180)"
        )));
    }
    Ok(if !(22.5..157.5).contains(&angle) {
        DirectionClass::Horizontal
    } else if angle < 80.0 {
        DirectionClass::Leftward
    } else if angle <= 110.0 {
        DirectionClass::Longitudinal
    } else {
        DirectionClass::Rightward
    })
}

/// Strand directions from image gradients inside the hair regions.
///
/// Strands run perpendicular to the intensity gradient. Angles are measured
/// counter-clockwise from the image x axis with y pointing up. Pixels outside
/// hair or with a gradient magnitude at or below `min_magnitude` get `None`.
pub fn direction_map(
    grad: &GradientPair,
    mask: &RegionMask,
    min_magnitude: f64,
) -> Result<Grid<Option<DirectionClass>>> {
    grad.gx.check_dims(mask.labels(), "direction map mask")?;
    let (w, h) = grad.gx.dims();
    let mut out = Grid::filled(w, h, None);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y).is_hair() {
                continue;
            }
            let (gx, gy) = (*grad.gx.get(x, y), *grad.gy.get(x, y));
            if gx.hypot(gy) <= min_magnitude {
                continue;
            }
            let gradient_deg = (-gy).atan2(gx).to_degrees();
            let strand = (gradient_deg + 90.0).rem_euclid(180.0);
            // rem_euclid can round up to exactly 180
            let strand = if strand >= 180.0 { 0.0 } else { strand };
            out.set(x, y, Some(quantize_direction(strand)?));
        }
    }
    Ok(out)
}
