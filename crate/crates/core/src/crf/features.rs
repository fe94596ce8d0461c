use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Plane;
use crate::geomfeat::{HvaChannels, RgbImage};

/// Which ToF-derived channels enter the appearance kernel as `C_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraFeature {
    /// Position and color only.
    #[default]
    None,
    /// Raw depth.
    Tof,
    Disparity,
    Variance,
    /// Normal-gravity angle.
    Normal,
    /// Disparity, variance and normal angle together.
    Hva,
}

impl ExtraFeature {
    pub const ALL: [ExtraFeature; 6] = [
        ExtraFeature::None,
        ExtraFeature::Tof,
        ExtraFeature::Disparity,
        ExtraFeature::Variance,
        ExtraFeature::Normal,
        ExtraFeature::Hva,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExtraFeature::None => "none",
            ExtraFeature::Tof => "tof",
            ExtraFeature::Disparity => "disparity",
            ExtraFeature::Variance => "variance",
            ExtraFeature::Normal => "normal",
            ExtraFeature::Hva => "hva",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown extra feature {name:?}")))
    }

    pub fn dim(self) -> usize {
        match self {
            ExtraFeature::None => 0,
            ExtraFeature::Hva => 3,
            _ => 1,
        }
    }

    /// Picks the planes this selection uses.
    pub fn select<'a>(self, depth: &'a Plane, hva: &'a HvaChannels) -> Vec<&'a Plane> {
        match self {
            ExtraFeature::None => vec![],
            ExtraFeature::Tof => vec![depth],
            ExtraFeature::Disparity => vec![&hva.h],
            ExtraFeature::Variance => vec![&hva.v],
            ExtraFeature::Normal => vec![&hva.a],
            ExtraFeature::Hva => hva.planes().to_vec(),
        }
    }
}

/// Per-pixel CRF features: position (implicit from the pixel index),
/// RGB intensity and an optional extra vector of fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureField {
    width: usize,
    height: usize,
    extra_dim: usize,
    intensity: Vec<[f64; 3]>,
    extra: Vec<f64>,
}

/// Borrowed view of one pixel's features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelFeature<'a> {
    pub position: [f64; 2],
    pub intensity: [f64; 3],
    pub extra: &'a [f64],
}

impl FeatureField {
    /// Uses the given values as-is; `extra` is pixel-major with `extra_dim`
    /// values per pixel.
    pub fn from_raw(
        width: usize,
        height: usize,
        intensity: Vec<[f64; 3]>,
        extra_dim: usize,
        extra: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::invalid("feature field must be non-empty"));
        }
        if intensity.len() != n || extra.len() != n * extra_dim {
            return Err(Error::invalid(format!(
                "feature field sizes do not match {width}x{height} with extra dim {extra_dim}"
            )));
        }
        if intensity
            .iter()
            .flatten()
            .chain(extra.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Self {
            width,
            height,
            extra_dim,
            intensity,
            extra,
        })
    }

    /// Builds features from an RGB image and extra channels. Each extra
    /// channel is z-scored over its valid pixels; invalid pixels take the
    /// channel mean (0 after scoring), and a constant channel becomes 0.
    pub fn build(rgb: &RgbImage, extra: &[&Plane]) -> Result<Self> {
        let (w, h) = rgb.dims();
        for plane in extra {
            rgb.check_dims(&plane.values, "extra feature plane")?;
        }
        let n = w * h;
        let d = extra.len();
        let mut data = vec![0.0; n * d];
        for (c, plane) in extra.iter().enumerate() {
            let (mean, std) = valid_moments(plane);
            if !(std > 0.0) {
                continue;
            }
            for (i, (v, ok)) in plane.values.iter().zip(plane.valid.iter()).enumerate() {
                if *ok {
                    data[i * d + c] = (v - mean) / std;
                }
            }
        }
        Self::from_raw(w, h, rgb.as_slice().to_vec(), d, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn extra_dim(&self) -> usize {
        self.extra_dim
    }

    pub fn intensities(&self) -> &[[f64; 3]] {
        &self.intensity
    }

    pub fn extras(&self) -> &[f64] {
        &self.extra
    }

    #[inline]
    pub fn position(&self, i: usize) -> [f64; 2] {
        [(i % self.width) as f64, (i / self.width) as f64]
    }

    #[inline]
    pub fn extra(&self, i: usize) -> &[f64] {
        &self.extra[i * self.extra_dim..(i + 1) * self.extra_dim]
    }

    pub fn pixel(&self, i: usize) -> PixelFeature<'_> {
        PixelFeature {
            position: self.position(i),
            intensity: self.intensity[i],
            extra: self.extra(i),
        }
    }

    /// Same features without the extra channels.
    pub fn without_extra(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            extra_dim: 0,
            intensity: self.intensity.clone(),
            extra: vec![],
        }
    }
}

fn valid_moments(plane: &Plane) -> (f64, f64) {
    let vals: Vec<f64> = plane
        .values
        .iter()
        .zip(plane.valid.iter())
        .filter(|(_, ok)| **ok)
        .map(|(v, _)| *v)
        .collect();
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zscore_with_holes() {
        let rgb = Grid::filled(2, 2, [1.0, 2.0, 3.0]);
        let values = Grid::from_vec(2, 2, vec![1.0, 3.0, 100.0, 2.0]).unwrap();
        let valid = Grid::from_vec(2, 2, vec![true, true, false, true]).unwrap();
        let plane = Plane::new(values, valid).unwrap();
        let f = FeatureField::build(&rgb, &[&plane]).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(f.extra(0)[0], -1.0 / s, epsilon = 1e-12);
        assert_abs_diff_eq!(f.extra(1)[0], 1.0 / s, epsilon = 1e-12);
        assert_eq!(f.extra(2)[0], 0.0);
        assert_eq!(f.extra(3)[0], 0.0);
        assert_eq!(f.position(3), [1.0, 1.0]);
    }

    #[test]
    fn constant_channel_is_zero() {
        let rgb = Grid::filled(3, 1, [0.0; 3]);
        let plane = Plane::new(Grid::filled(3, 1, 5.0), Grid::filled(3, 1, true)).unwrap();
        let f = FeatureField::build(&rgb, &[&plane, &plane]).unwrap();
        assert_eq!(f.extra_dim(), 2);
        assert!(f.extras().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn raw_checks() {
        assert!(FeatureField::from_raw(1, 1, vec![[0.0; 3]], 1, vec![]).is_err());
        assert!(FeatureField::from_raw(1, 1, vec![[f64::NAN, 0.0, 0.0]], 0, vec![]).is_err());
        assert!(FeatureField::from_raw(0, 1, vec![], 0, vec![]).is_err());
    }

    #[test]
    fn names_roundtrip() {
        for f in ExtraFeature::ALL {
            assert_eq!(ExtraFeature::from_name(f.name()).unwrap(), f);
        }
        assert!(ExtraFeature::from_name("rgb").is_err());
    }
}
