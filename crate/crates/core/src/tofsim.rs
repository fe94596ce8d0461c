//! Correlation-pixel model of a continuous-wave time-of-flight camera.
//!
//! A pixel integrates the incoming irradiance against a zero-mean reference
//! waveform over one modulation period. Smooth surfaces return light along a
//! single path; filamentous surfaces such as hair return a spread of path
//! lengths described by a temporal point spread function. Both cases are
//! evaluated by quadrature over the period, decoded from four phase-shifted
//! samples and converted to depth.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{DepthFrame, FourPhaseFrame};
use crate::grid::Grid;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
pub const MIN_QUADRATURE_STEPS: usize = 64;
/// Nodes used to discretize a gaussian PSF over ±4σ.
pub const GAUSSIAN_PSF_NODES: usize = 33;

/// Reference phase offsets (in the `f(t + φ/ω)` convention) for the samples
/// `a1..a4`. Each sample delays the reference by a further quarter period.
pub const SAMPLE_OFFSETS: [f64; 4] = [0.0, 3.0 * FRAC_PI_2, PI, FRAC_PI_2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sinusoid,
    /// Zero-mean square wave, +1 on the first and last quarter of the period.
    Rectangle,
}

impl Waveform {
    #[inline]
    fn eval(self, phase: f64) -> f64 {
        match self {
            Waveform::Sinusoid => phase.cos(),
            Waveform::Rectangle => {
                let frac = (phase / TAU).rem_euclid(1.0);
                if (0.25..0.75).contains(&frac) {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToFConfigRepr", into = "ToFConfigRepr")]
pub struct ToFConfig {
    modulation_period: f64,
    /// E_m, amplitude of the modulated illumination.
    pub modulated_amplitude: f64,
    /// E_0; rejected by the zero-mean reference.
    pub dark_current: f64,
    pub light_speed: f64,
    pub quadrature_steps: usize,
    pub waveform: Waveform,
    /// Number of modulation periods integrated per sample.
    pub exposure_periods: u32,
    /// Std of additive gaussian noise on each correlation sample.
    pub sensor_noise_std: f64,
}

impl Default for ToFConfig {
    fn default() -> Self {
        Self::with_frequency(20e6)
    }
}

impl ToFConfig {
    pub fn with_period(period: f64) -> Self {
        Self {
            modulation_period: period,
            modulated_amplitude: 1.0,
            dark_current: 0.0,
            light_speed: SPEED_OF_LIGHT,
            quadrature_steps: 256,
            waveform: Waveform::Sinusoid,
            exposure_periods: 1,
            sensor_noise_std: 0.0,
        }
    }

    pub fn with_frequency(frequency: f64) -> Self {
        Self::with_period(1.0 / frequency)
    }

    pub fn modulation_period(&self) -> f64 {
        self.modulation_period
    }

    pub fn modulation_frequency(&self) -> f64 {
        1.0 / self.modulation_period
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU / self.modulation_period
    }

    pub fn set_modulation_period(&mut self, period: f64) {
        self.modulation_period = period;
    }

    /// Maximum distance encodable before the phase wraps.
    pub fn unambiguous_range(&self) -> f64 {
        self.light_speed * self.modulation_period / 2.0
    }

    /// Peak correlation of a single path with unit attenuation.
    pub fn correlation_amplitude(&self, attenuation: f64) -> f64 {
        attenuation
            * self.modulated_amplitude
            * self.exposure_periods as f64
            * self.modulation_period
            / 2.0
    }

    /// Per-sample noise std that produces roughly `depth_std` meters of depth
    /// noise on a sinusoidal single-path pixel with the given attenuation.
    pub fn correlation_noise_for_depth_std(&self, depth_std: f64, attenuation: f64) -> f64 {
        let phase_std = depth_std * 4.0 * PI / (self.light_speed * self.modulation_period);
        phase_std * std::f64::consts::SQRT_2 * self.correlation_amplitude(attenuation)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_period.is_finite() && self.modulation_period > 0.0) {
            return Err(Error::config(
                "modulation period must be positive and finite",
            ));
        }
        if !(self.modulated_amplitude.is_finite() && self.modulated_amplitude >= 0.0) {
            return Err(Error::config("modulated amplitude must be >= 0"));
        }
        if !self.dark_current.is_finite() {
            return Err(Error::config("dark current must be finite"));
        }
        if !(self.light_speed.is_finite() && self.light_speed > 0.0) {
            return Err(Error::config("light speed must be positive"));
        }
        if self.quadrature_steps < MIN_QUADRATURE_STEPS {
            return Err(Error::config(format!(
                "quadrature_steps = {} is below the minimum of {MIN_QUADRATURE_STEPS}",
                self.quadrature_steps
            )));
        }
        if self.exposure_periods == 0 {
            return Err(Error::config("exposure_periods must be >= 1"));
        }
        if !(self.sensor_noise_std.is_finite() && self.sensor_noise_std >= 0.0) {
            return Err(Error::config("sensor noise std must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ToFConfigRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modulation_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modulation_period: Option<f64>,
    #[serde(default = "one")]
    modulated_amplitude: f64,
    #[serde(default)]
    dark_current: f64,
    #[serde(default = "light_speed")]
    light_speed: f64,
    #[serde(default = "quadrature_steps")]
    quadrature_steps: usize,
    #[serde(default)]
    waveform: Waveform,
    #[serde(default = "one_u32")]
    exposure_periods: u32,
    #[serde(default)]
    sensor_noise_std: f64,
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn light_speed() -> f64 {
    SPEED_OF_LIGHT
}
fn quadrature_steps() -> usize {
    256
}

impl TryFrom<ToFConfigRepr> for ToFConfig {
    type Error = Error;

    fn try_from(r: ToFConfigRepr) -> Result<Self> {
        let period = match (r.modulation_frequency, r.modulation_period) {
            (None, None) => 1.0 / 20e6,
            (Some(f), None) => 1.0 / f,
            (None, Some(t)) => t,
            (Some(f), Some(t)) => {
                if ((f * t) - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "modulation_frequency {f} and modulation_period {t} disagree"
                    )));
                }
                t
            }
        };
        let cfg = ToFConfig {
            modulation_period: period,
            modulated_amplitude: r.modulated_amplitude,
            dark_current: r.dark_current,
            light_speed: r.light_speed,
            quadrature_steps: r.quadrature_steps,
            waveform: r.waveform,
            exposure_periods: r.exposure_periods,
            sensor_noise_std: r.sensor_noise_std,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ToFConfig> for ToFConfigRepr {
    fn from(c: ToFConfig) -> Self {
        ToFConfigRepr {
            modulation_frequency: Some(c.modulation_frequency()),
            modulation_period: Some(c.modulation_period),
            modulated_amplitude: c.modulated_amplitude,
            dark_current: c.dark_current,
            light_speed: c.light_speed,
            quadrature_steps: c.quadrature_steps,
            waveform: c.waveform,
            exposure_periods: c.exposure_periods,
            sensor_noise_std: c.sensor_noise_std,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// Round-trip travel time in seconds.
    pub travel_time: f64,
    pub weight: f64,
}

/// Distribution of returned light over travel time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalPsf {
    Discrete { samples: Vec<PathSample> },
    Gaussian { mean: f64, std: f64, weight: f64 },
}

impl TemporalPsf {
    pub fn single(travel_time: f64, weight: f64) -> Self {
        TemporalPsf::Discrete {
            samples: vec![PathSample {
                travel_time,
                weight,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TemporalPsf::Discrete { samples } => {
                if samples.is_empty() {
                    return Err(Error::invalid("temporal PSF has no samples"));
                }
                for s in samples {
                    if !(s.travel_time.is_finite() && s.travel_time >= 0.0) {
                        return Err(Error::invalid("PSF travel times must be finite and >= 0"));
                    }
                    if !(s.weight.is_finite() && s.weight >= 0.0) {
                        return Err(Error::invalid("PSF weights must be finite and >= 0"));
                    }
                }
                if !samples.iter().any(|s| s.weight > 0.0) {
                    return Err(Error::invalid("temporal PSF has no positive weight"));
                }
            }
            TemporalPsf::Gaussian { mean, std, weight } => {
                if !(mean.is_finite() && *mean >= 0.0) {
                    return Err(Error::invalid("gaussian PSF mean must be >= 0"));
                }
                if !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::invalid("gaussian PSF std must be >= 0"));
                }
                if !(weight.is_finite() && *weight > 0.0) {
                    return Err(Error::invalid("gaussian PSF weight must be > 0"));
                }
            }
        }
        Ok(())
    }

    /// Discrete nodes representing this PSF. Gaussian nodes that would fall
    /// at negative travel time are dropped and the rest renormalized.
    pub fn nodes(&self) -> Vec<PathSample> {
        match self {
            TemporalPsf::Discrete { samples } => samples.clone(),
            TemporalPsf::Gaussian { mean, std, weight } => {
                if *std == 0.0 {
                    return vec![PathSample {
                        travel_time: *mean,
                        weight: *weight,
                    }];
                }
                let last = GAUSSIAN_PSF_NODES - 1;
                let half = last as f64 / 2.0;
                // trapezoid weights over [-4σ, 4σ]
                let mut nodes: Vec<PathSample> = (0..GAUSSIAN_PSF_NODES)
                    .map(|k| {
                        let z = 4.0 * (k as f64 - half) / half;
                        let end = if k == 0 || k == last { 0.5 } else { 1.0 };
                        PathSample {
                            travel_time: mean + std * z,
                            weight: end * (-0.5 * z * z).exp(),
                        }
                    })
                    .filter(|s| s.travel_time >= 0.0)
                    .collect();
                let total: f64 = nodes.iter().map(|s| s.weight).sum();
                for n in &mut nodes {
                    n.weight *= weight / total;
                }
                nodes
            }
        }
    }

    /// PSF whose correlation is the sum of both inputs' correlations.
    pub fn superpose(&self, other: &TemporalPsf) -> TemporalPsf {
        let mut samples = self.nodes();
        samples.extend(other.nodes());
        TemporalPsf::Discrete { samples }
    }
}

fn check_finite(values: &[(f64, &str)]) -> Result<()> {
    for (v, name) in values {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

/// `∫₀ᵀ g(t+τ) f(t+φ/ω) dt` by the periodic rectangle rule, which is exact
/// for trigonometric polynomials of degree below `quadrature_steps`.
fn reference_integral(cfg: &ToFConfig, travel_time: f64, phase_offset: f64) -> f64 {
    let n = cfg.quadrature_steps;
    let period = cfg.modulation_period;
    let omega = cfg.angular_frequency();
    let dt = period / n as f64;
    let delay = omega * travel_time;
    let mut acc = 0.0;
    for k in 0..n {
        let wt = TAU * k as f64 / n as f64;
        acc += cfg.waveform.eval(wt + delay) * cfg.waveform.eval(wt + phase_offset);
    }
    acc * dt
}

/// Correlation of a smooth (single-path) return.
///
/// The dark-current term integrates a constant against the zero-mean
/// reference over whole periods and therefore contributes nothing.
pub fn correlate_single_path(
    cfg: &ToFConfig,
    attenuation: f64,
    travel_time: f64,
    phase_offset: f64,
) -> Result<f64> {
    cfg.validate()?;
    check_finite(&[
        (attenuation, "attenuation"),
        (travel_time, "travel time"),
        (phase_offset, "phase offset"),
    ])?;
    if travel_time < 0.0 {
        return Err(Error::invalid("travel time must be >= 0"));
    }
    Ok(path_sum(
        cfg,
        std::iter::once((travel_time, attenuation)),
        phase_offset,
    ))
}

fn path_sum(cfg: &ToFConfig, paths: impl Iterator<Item = (f64, f64)>, phase_offset: f64) -> f64 {
    let sum: f64 = paths
        .map(|(tau, alpha)| alpha * reference_integral(cfg, tau, phase_offset))
        .sum();
    cfg.modulated_amplitude * cfg.exposure_periods as f64 * sum
}

/// Correlation of a rough (multi-path) return described by `psf`.
pub fn correlate_multipath(cfg: &ToFConfig, psf: &TemporalPsf, phase_offset: f64) -> Result<f64> {
    cfg.validate()?;
    psf.validate()?;
    check_finite(&[(phase_offset, "phase offset")])?;
    let nodes = psf.nodes();
    Ok(path_sum(
        cfg,
        nodes.iter().map(|s| (s.travel_time, s.weight)),
        phase_offset,
    ))
}

/// Phase in `[0, 2π)` and amplitude from the four correlation samples.
pub fn decode_four_samples(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<(f64, f64)> {
    check_finite(&[(a1, "a1"), (a2, "a2"), (a3, "a3"), (a4, "a4")])?;
    let y = a4 - a2;
    let x = a1 - a3;
    if x == 0.0 && y == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let mut phase = y.atan2(x);
    if phase < 0.0 {
        phase += TAU;
    }
    if phase >= TAU {
        phase = 0.0;
    }
    let amplitude = (y * y + x * x).sqrt() / 2.0;
    Ok((phase, amplitude))
}

pub fn phase_to_depth(phase: f64, cfg: &ToFConfig) -> Result<f64> {
    if !phase.is_finite() || phase < 0.0 {
        return Err(Error::invalid(format!("phase must be >= 0, got {phase}")));
    }
    if phase >= TAU {
        return Err(Error::invalid(format!("phase must be < 2π, got {phase}")));
    }
    Ok(cfg.light_speed * cfg.modulation_period * phase / (4.0 * PI))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Material {
    Smooth,
    /// Filamentous surface: `path_forks` paths, each lengthened by a
    /// half-normal delay of scale `scatter_spread` seconds.
    Rough {
        scatter_spread: f64,
        path_forks: u32,
    },
}

impl Material {
    pub fn is_rough(&self) -> bool {
        matches!(self, Material::Rough { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// True distance in meters.
    pub distance: Grid<f64>,
    pub material: Grid<Material>,
    /// Reflectance-style attenuation of the primary return.
    pub attenuation: Grid<f64>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn uniform(
        width: usize,
        height: usize,
        distance: f64,
        material: Material,
        seed: u64,
    ) -> Self {
        Self {
            distance: Grid::filled(width, height, distance),
            material: Grid::filled(width, height, material),
            attenuation: Grid::filled(width, height, 1.0),
            seed,
        }
    }

    pub fn width(&self) -> usize {
        self.distance.width()
    }

    pub fn height(&self) -> usize {
        self.distance.height()
    }

    pub fn validate(&self) -> Result<()> {
        self.distance.check_dims(&self.material, "scene material")?;
        self.distance
            .check_dims(&self.attenuation, "scene attenuation")?;
        if self.distance.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("scene distances must be > 0"));
        }
        if self
            .attenuation
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            return Err(Error::invalid("scene attenuation must be >= 0"));
        }
        for m in self.material.iter() {
            if let Material::Rough {
                scatter_spread,
                path_forks,
            } = m
            {
                if !(scatter_spread.is_finite() && *scatter_spread >= 0.0) {
                    return Err(Error::invalid("scatter spread must be >= 0"));
                }
                if *path_forks == 0 {
                    return Err(Error::invalid("rough material needs at least one path"));
                }
            }
        }
        Ok(())
    }
}

/// RNG for one pixel; independent of evaluation order.
pub(crate) fn pixel_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws the per-pixel PSF for a rough pixel.
fn rough_psf(
    rng: &mut ChaCha8Rng,
    base_time: f64,
    attenuation: f64,
    scatter_spread: f64,
    path_forks: u32,
) -> TemporalPsf {
    let mut samples = Vec::with_capacity(path_forks as usize);
    for _ in 0..path_forks {
        let z: f64 = StandardNormal.sample(rng);
        let w: f64 = rng.random_range(0.2..1.0);
        samples.push(PathSample {
            travel_time: base_time + scatter_spread * z.abs(),
            weight: w,
        });
    }
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    for s in &mut samples {
        s.weight *= attenuation / total;
    }
    TemporalPsf::Discrete { samples }
}

/// Renders the four correlation images of `scene` and decodes them to depth.
/// Pixels whose samples carry no modulation become holes.
pub fn simulate_frame(scene: &SceneSpec, cfg: &ToFConfig) -> Result<(FourPhaseFrame, DepthFrame)> {
    cfg.validate()?;
    scene.validate()?;
    let (w, h) = (scene.width(), scene.height());
    let noise = if cfg.sensor_noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.sensor_noise_std).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };

    let samples: Vec<[f64; 4]> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut rng = pixel_rng(scene.seed, i);
            let d = scene.distance.as_slice()[i];
            let alpha = scene.attenuation.as_slice()[i];
            let tau = 2.0 * d / cfg.light_speed;
            let psf = match scene.material.as_slice()[i] {
                Material::Smooth => TemporalPsf::single(tau, alpha),
                Material::Rough {
                    scatter_spread,
                    path_forks,
                } => rough_psf(&mut rng, tau, alpha, scatter_spread, path_forks),
            };
            let nodes = psf.nodes();
            let mut out = [0.0; 4];
            for (k, offset) in SAMPLE_OFFSETS.iter().enumerate() {
                out[k] = path_sum(
                    cfg,
                    nodes.iter().map(|s| (s.travel_time, s.weight)),
                    *offset,
                );
                if let Some(n) = &noise {
                    out[k] += n.sample(&mut rng);
                }
            }
            out
        })
        .collect();

    let plane = |k: usize| Grid::from_vec(w, h, samples.iter().map(|s| s[k]).collect());
    let frame = FourPhaseFrame::new(plane(0)?, plane(1)?, plane(2)?, plane(3)?)?;
    let depth = decode_frame(&frame, cfg)?;
    Ok((frame, depth))
}

/// Decodes every pixel of a four-phase frame to depth.
pub fn decode_frame(frame: &FourPhaseFrame, cfg: &ToFConfig) -> Result<DepthFrame> {
    let (w, h) = (frame.width(), frame.height());
    let mut depth = DepthFrame::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let decoded = decode_four_samples(
                *frame.a1.get(x, y),
                *frame.a2.get(x, y),
                *frame.a3.get(x, y),
                *frame.a4.get(x, y),
            );
            match decoded {
                Ok((phase, _)) => depth.set(x, y, Some(phase_to_depth(phase, cfg)?)),
                Err(Error::DegenerateSignal) => depth.set(x, y, None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Composite Simpson over one period with sinusoidal waveforms, written
    /// directly from the integral definition.
    fn simpson_oracle(cfg: &ToFConfig, alpha: f64, tau: f64, phi: f64) -> f64 {
        let n = 20_000;
        let t_end = cfg.modulation_period();
        let omega = cfg.angular_frequency();
        let h = t_end / n as f64;
        let integrand = |t: f64| {
            (cfg.dark_current + alpha * cfg.modulated_amplitude * (omega * (t + tau)).cos())
                * (omega * t + phi).cos()
        };
        let mut acc = integrand(0.0) + integrand(t_end);
        for k in 1..n {
            let c = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * integrand(k as f64 * h);
        }
        acc * h / 3.0
    }

    fn cfg20() -> ToFConfig {
        ToFConfig::with_period(5e-8)
    }

    #[test]
    fn aligned_single_path_gives_half_period() {
        let cfg = cfg20();
        let phi = 1.1;
        let tau = phi / cfg.angular_frequency();
        let h = correlate_single_path(&cfg, 1.0, tau, phi).unwrap();
        let oracle = simpson_oracle(&cfg, 1.0, tau, phi);
        assert_abs_diff_eq!(oracle, 2.5e-8, epsilon = 1e-15);
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-15);
    }

    #[test]
    fn zero_attenuation_gives_zero() {
        let cfg = cfg20();
        assert_eq!(correlate_single_path(&cfg, 0.0, 1e-9, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_phase_gives_zero() {
        let cfg = cfg20();
        let phi = 0.4;
        let tau = (phi + FRAC_PI_2) / cfg.angular_frequency();
        let h = correlate_single_path(&cfg, 1.0, tau, phi).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(simpson_oracle(&cfg, 1.0, tau, phi), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn dark_current_is_rejected() {
        let mut cfg = cfg20();
        cfg.dark_current = 5.0;
        let h = correlate_single_path(&cfg, 0.7, 3e-9, 0.0).unwrap();
        let oracle = simpson_oracle(&cfg, 0.7, 3e-9, 0.0);
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-15);
    }

    #[test]
    fn matches_closed_form_over_random_inputs() {
        let cfg = cfg20();
        let omega = cfg.angular_frequency();
        for k in 0..50 {
            let tau = k as f64 * 1.3e-9;
            let phi = k as f64 * 0.37 % TAU;
            let alpha = 0.1 + k as f64 * 0.02;
            let closed = alpha * cfg.modulation_period() / 2.0 * (omega * tau - phi).cos();
            let h = correlate_single_path(&cfg, alpha, tau, phi).unwrap();
            assert_abs_diff_eq!(h, closed, epsilon = 1e-20);
        }
    }

    #[test]
    fn single_path_rejects_bad_inputs() {
        let cfg = cfg20();
        assert!(matches!(
            correlate_single_path(&cfg, f64::NAN, 0.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            correlate_single_path(&cfg, 1.0, -1e-9, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        let mut coarse = cfg20();
        coarse.quadrature_steps = 32;
        assert!(matches!(
            correlate_single_path(&coarse, 1.0, 0.0, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn degenerate_psf_equals_single_path() {
        let cfg = cfg20();
        let (tau, alpha, phi) = (7.3e-9, 0.42, 2.2);
        let a = correlate_multipath(&cfg, &TemporalPsf::single(tau, alpha), phi).unwrap();
        let b = correlate_single_path(&cfg, alpha, tau, phi).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn half_period_pair_interferes_destructively() {
        let cfg = cfg20();
        let tau = 4e-9;
        let psf = TemporalPsf::Discrete {
            samples: vec![
                PathSample {
                    travel_time: tau,
                    weight: 0.5,
                },
                PathSample {
                    travel_time: tau + cfg.modulation_period() / 2.0,
                    weight: 0.5,
                },
            ],
        };
        for phi in SAMPLE_OFFSETS {
            let h = correlate_multipath(&cfg, &psf, phi).unwrap();
            assert_abs_diff_eq!(h, 0.0, epsilon = 1e-20);
            let oracle = 0.5 * simpson_oracle(&cfg, 1.0, tau, phi)
                + 0.5 * simpson_oracle(&cfg, 1.0, tau + cfg.modulation_period() / 2.0, phi);
            assert_abs_diff_eq!(oracle, 0.0, epsilon = 1e-18);
        }
    }

    #[test]
    fn narrow_gaussian_psf_converges_to_single_path() {
        let cfg = cfg20();
        let psf = TemporalPsf::Gaussian {
            mean: 6e-9,
            std: 1e-12,
            weight: 1.0,
        };
        for phi in SAMPLE_OFFSETS {
            let g = correlate_multipath(&cfg, &psf, phi).unwrap();
            let s = correlate_single_path(&cfg, 1.0, 6e-9, phi).unwrap();
            assert!((g - s).abs() < 1e-6);
            // relative to the signal scale as well
            assert!((g - s).abs() / cfg.correlation_amplitude(1.0) < 1e-6);
        }
    }

    #[test]
    fn gaussian_psf_nodes_match_finer_discretization() {
        let psf = TemporalPsf::Gaussian {
            mean: 10e-9,
            std: 0.5e-9,
            weight: 1.0,
        };
        let nodes = psf.nodes();
        assert_eq!(nodes.len(), GAUSSIAN_PSF_NODES);
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // 129-node reference
        let cfg = cfg20();
        let omega = cfg.angular_frequency();
        let fine: Vec<(f64, f64)> = (0..129)
            .map(|k| {
                let z = 4.0 * (k as f64 - 64.0) / 64.0;
                let end = if k == 0 || k == 128 { 0.5 } else { 1.0 };
                (10e-9 + 0.5e-9 * z, end * (-0.5 * z * z).exp())
            })
            .collect();
        let norm: f64 = fine.iter().map(|p| p.1).sum();
        let fine_val: f64 = fine.iter().map(|(t, w)| w / norm * (omega * t).cos()).sum();
        let coarse_val: f64 = nodes
            .iter()
            .map(|n| n.weight * (omega * n.travel_time).cos())
            .sum();
        assert!((fine_val - coarse_val).abs() < 1e-7);
    }

    #[test]
    fn empty_psf_is_rejected() {
        let cfg = cfg20();
        let psf = TemporalPsf::Discrete { samples: vec![] };
        assert!(matches!(
            correlate_multipath(&cfg, &psf, 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn decode_examples() {
        let (p, a) = decode_four_samples(2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(p, 0.0);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        let (p, a) = decode_four_samples(3.0, 1.0, 1.0, 3.0).unwrap();
        assert_abs_diff_eq!(p, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(
            decode_four_samples(1.0, 1.0, 1.0, 1.0),
            Err(Error::DegenerateSignal)
        ));
    }

    #[test]
    fn decode_covers_all_quadrants() {
        for k in 0..16 {
            let theta = k as f64 * TAU / 16.0 + 0.01;
            let (p, _) =
                decode_four_samples(theta.cos(), -theta.sin(), -theta.cos(), theta.sin()).unwrap();
            assert_abs_diff_eq!(p, theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_to_depth_examples() {
        let mut cfg = cfg20();
        cfg.light_speed = 3e8;
        assert_eq!(phase_to_depth(0.0, &cfg).unwrap(), 0.0);
        assert_abs_diff_eq!(
            phase_to_depth(FRAC_PI_2, &cfg).unwrap(),
            1.875,
            epsilon = 1e-12
        );
        assert!(matches!(
            phase_to_depth(-0.1, &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_path_roundtrip_at_1_2_m() {
        let cfg = cfg20();
        let d = 1.2;
        let tau = 2.0 * d / cfg.light_speed;
        let a: Vec<f64> = SAMPLE_OFFSETS
            .iter()
            .map(|phi| correlate_single_path(&cfg, 1.0, tau, *phi).unwrap())
            .collect();
        let (phase, _) = decode_four_samples(a[0], a[1], a[2], a[3]).unwrap();
        assert_abs_diff_eq!(phase_to_depth(phase, &cfg).unwrap(), d, epsilon = 1e-6);
    }

    #[test]
    fn noiseless_smooth_scene_decodes_exactly() {
        let cfg = cfg20();
        let scene = SceneSpec::uniform(12, 9, 1.5, Material::Smooth, 3);
        let (_, depth) = simulate_frame(&scene, &cfg).unwrap();
        assert_eq!(depth.valid_count(), 12 * 9);
        for d in depth.depth().iter() {
            assert_abs_diff_eq!(*d, 1.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let mut cfg = cfg20();
        cfg.sensor_noise_std = cfg.correlation_noise_for_depth_std(1e-3, 1.0);
        let mut scene = SceneSpec::uniform(16, 16, 1.0, Material::Smooth, 99);
        for y in 0..16 {
            for x in 8..16 {
                scene.material.set(
                    x,
                    y,
                    Material::Rough {
                        scatter_spread: 0.5e-9,
                        path_forks: 4,
                    },
                );
            }
        }
        let (fa, da) = simulate_frame(&scene, &cfg).unwrap();
        let (fb, db) = simulate_frame(&scene, &cfg).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(da, db);
    }

    #[test]
    fn zero_return_pixels_become_holes() {
        let cfg = cfg20();
        let mut scene = SceneSpec::uniform(4, 4, 1.0, Material::Smooth, 0);
        scene.attenuation.set(1, 2, 0.0);
        let (_, depth) = simulate_frame(&scene, &cfg).unwrap();
        assert!(!*depth.valid().get(1, 2));
        assert_eq!(depth.valid_count(), 15);
    }

    #[test]
    fn config_json_accepts_frequency_or_period() {
        let a: ToFConfig = serde_json::from_str(r#"{"modulation_frequency": 2e7}"#).unwrap();
        let b: ToFConfig = serde_json::from_str(r#"{"modulation_period": 5e-8}"#).unwrap();
        assert_abs_diff_eq!(
            a.modulation_period(),
            b.modulation_period(),
            epsilon = 1e-20
        );
        let bad = serde_json::from_str::<ToFConfig>(
            r#"{"modulation_period": 5e-8, "modulation_frequency": 1e7}"#,
        );
        assert!(bad.is_err());
        let low = serde_json::from_str::<ToFConfig>(r#"{"quadrature_steps": 16}"#);
        assert!(low.is_err());
        let back: ToFConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rectangle_waveform_is_zero_mean_and_decodes_monotonically() {
        let mut cfg = cfg20();
        cfg.waveform = Waveform::Rectangle;
        let mut last = -1.0;
        for k in 1..20 {
            let d = k as f64 * 0.3;
            let tau = 2.0 * d / cfg.light_speed;
            let a: Vec<f64> = SAMPLE_OFFSETS
                .iter()
                .map(|phi| correlate_single_path(&cfg, 1.0, tau, *phi).unwrap())
                .collect();
            let (phase, _) = decode_four_samples(a[0], a[1], a[2], a[3]).unwrap();
            assert!(phase > last);
            last = phase;
        }
    }
}
