use serde::{Deserialize, Serialize};

use crate::crf::{FeatureField, PixelFeature};
use crate::error::{Error, Result};

/// Kernel weights and bandwidths. Bandwidths are in pixels (α, δ),
/// intensity units (β) and z-scored extra-feature units (γ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    pub w1: f64,
    pub w2: f64,
    pub theta_alpha: f64,
    pub theta_beta: f64,
    pub theta_gamma: f64,
    pub theta_delta: f64,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            theta_alpha: 25.0,
            theta_beta: 25.0,
            theta_gamma: 35.0,
            theta_delta: 45.0,
        }
    }
}

impl CrfParams {
    /// Default bandwidths with a unit-bandwidth smoothness kernel.
    pub fn unit_smoothness() -> Self {
        Self {
            w2: 1.0,
            theta_delta: 1.0,
            ..Self::default()
        }
    }

    /// Both weights zero: inference returns the unary softmax.
    pub fn identity() -> Self {
        Self {
            w1: 0.0,
            w2: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w1", self.w1), ("w2", self.w2)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {w}"
                )));
            }
        }
        for (name, t) in [
            ("theta_alpha", self.theta_alpha),
            ("theta_beta", self.theta_beta),
            ("theta_gamma", self.theta_gamma),
            ("theta_delta", self.theta_delta),
        ] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and > 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appearance plus smoothness kernel between two pixels.
pub fn pairwise_kernel(fi: &PixelFeature<'_>, fj: &PixelFeature<'_>, params: &CrfParams) -> f64 {
    let dp = sq_dist(&fi.position, &fj.position);
    let di = sq_dist(&fi.intensity, &fj.intensity);
    let dc = sq_dist(fi.extra, fj.extra);
    let appearance = (-dp / (2.0 * params.theta_alpha.powi(2))
        - di / (2.0 * params.theta_beta.powi(2))
        - dc / (2.0 * params.theta_gamma.powi(2)))
    .exp();
    let smoothness = (-dp / (2.0 * params.theta_delta.powi(2))).exp();
    params.w1 * appearance + params.w2 * smoothness
}

/// Features pre-divided by their bandwidths so each kernel is
/// `exp(-|a_i - a_j|² / 2)`.
pub(crate) struct ScaledFeatures {
    pub appearance_dim: usize,
    pub appearance: Vec<f64>,
    pub smoothness: Vec<f64>,
}

impl ScaledFeatures {
    pub fn new(feats: &FeatureField, params: &CrfParams) -> Self {
        let d = 5 + feats.extra_dim();
        let n = feats.len();
        let mut appearance = Vec::with_capacity(n * d);
        let mut smoothness = Vec::with_capacity(n * 2);
        for i in 0..n {
            let p = feats.position(i);
            appearance.extend(p.iter().map(|v| v / params.theta_alpha));
            appearance.extend(feats.intensities()[i].iter().map(|v| v / params.theta_beta));
            appearance.extend(feats.extra(i).iter().map(|v| v / params.theta_gamma));
            smoothness.extend(p.iter().map(|v| v / params.theta_delta));
        }
        Self {
            appearance_dim: d,
            appearance,
            smoothness,
        }
    }

    #[inline]
    pub fn appearance(&self, i: usize) -> &[f64] {
        &self.appearance[i * self.appearance_dim..(i + 1) * self.appearance_dim]
    }

    #[inline]
    pub fn smoothness(&self, i: usize) -> &[f64] {
        &self.smoothness[i * 2..i * 2 + 2]
    }

    #[inline]
    pub fn kernels(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (-0.5 * sq_dist(self.appearance(i), self.appearance(j))).exp(),
            (-0.5 * sq_dist(self.smoothness(i), self.smoothness(j))).exp(),
        )
    }
}
