//! Depth-noise statistics: Gaussian-windowed variance maps, their
//! multi-scale average, per-region histograms and a histogram separability
//! score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DepthFrame;
use crate::grid::Grid;

/// Window sizes averaged by [`multiscale_variance`].
pub const MULTISCALE_WINDOWS: [usize; 4] = [5, 7, 9, 11];
pub const DEFAULT_HISTOGRAM_BINS: usize = 64;

/// Region taxonomy of the annotated head images. The discriminant is the
/// on-disk label id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum RegionLabel {
    Background = 0,
    Face = 1,
    HairTop = 2,
    HairBack = 3,
    HairLeft = 4,
    HairRight = 5,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 6] = [
        RegionLabel::Background,
        RegionLabel::Face,
        RegionLabel::HairTop,
        RegionLabel::HairBack,
        RegionLabel::HairLeft,
        RegionLabel::HairRight,
    ];
    pub const HAIR: [RegionLabel; 4] = [
        RegionLabel::HairTop,
        RegionLabel::HairBack,
        RegionLabel::HairLeft,
        RegionLabel::HairRight,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("region label id {id} is outside 0..=5")))
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionLabel::Background => "background",
            RegionLabel::Face => "face",
            RegionLabel::HairTop => "hair_top",
            RegionLabel::HairBack => "hair_back",
            RegionLabel::HairLeft => "hair_left",
            RegionLabel::HairRight => "hair_right",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown region label {name:?}")))
    }

    pub fn is_hair(self) -> bool {
        self.id() >= 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    labels: Grid<RegionLabel>,
}

impl RegionMask {
    pub fn new(labels: Grid<RegionLabel>) -> Self {
        Self { labels }
    }

    pub fn from_ids(ids: &Grid<u8>) -> Result<Self> {
        let labels = ids
            .iter()
            .map(|id| RegionLabel::from_id(*id))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: Grid::from_vec(ids.width(), ids.height(), labels)?,
        })
    }

    pub fn ids(&self) -> Grid<u8> {
        self.labels.map(|l| l.id())
    }

    pub fn labels(&self) -> &Grid<RegionLabel> {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> RegionLabel {
        *self.labels.get(x, y)
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Pixels whose `(2r+1)²` neighborhood (clipped at the frame border)
    /// carries a single label, i.e. windows of that size see one region.
    pub fn interior(&self, radius: usize) -> Grid<bool> {
        let (w, h) = self.labels.dims();
        Grid::from_fn(w, h, |x, y| {
            let l = self.get(x, y);
            (y.saturating_sub(radius)..(y + radius + 1).min(h)).all(|yy| {
                (x.saturating_sub(radius)..(x + radius + 1).min(w)).all(|xx| self.get(xx, yy) == l)
            })
        })
    }

    /// Labels present in the mask, in id order.
    pub fn present(&self) -> Vec<RegionLabel> {
        RegionLabel::ALL
            .iter()
            .copied()
            .filter(|l| self.labels.iter().any(|m| m == l))
            .collect()
    }
}

/// How the window mean `d̄` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMean {
    /// Gaussian-weighted mean, consistent with the weighted deviation sum.
    #[default]
    Weighted,
    /// Plain mean of the valid window samples.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceMap {
    values: Grid<f64>,
    valid: Grid<bool>,
    /// Window size; the largest one for a multi-scale map.
    pub window_size: usize,
    pub gaussian_sigma: f64,
}

impl VarianceMap {
    pub fn new(
        values: Grid<f64>,
        valid: Grid<bool>,
        window_size: usize,
        gaussian_sigma: f64,
    ) -> Result<Self> {
        values.check_dims(&valid, "variance map")?;
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("variance values must be >= 0"));
        }
        Ok(Self {
            values,
            valid,
            window_size,
            gaussian_sigma,
        })
    }

    /// Copy in which pixels outside `keep` are invalid.
    pub fn restricted(&self, keep: &Grid<bool>) -> Result<VarianceMap> {
        self.values.check_dims(keep, "variance restriction")?;
        let valid = Grid::from_vec(
            self.width(),
            self.height(),
            self.valid
                .iter()
                .zip(keep.iter())
                .map(|(v, k)| *v && *k)
                .collect(),
        )?;
        VarianceMap::new(
            self.values.clone(),
            valid,
            self.window_size,
            self.gaussian_sigma,
        )
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid.get(x, y).then(|| *self.values.get(x, y))
    }
}

pub fn default_sigma(window_size: usize) -> f64 {
    window_size as f64 / 4.0
}

fn check_window(window_size: usize, sigma: f64) -> Result<()> {
    if window_size < 3 || window_size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "window size must be odd and >= 3, got {window_size}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(())
}

/// Gaussian-windowed local variance of depth.
///
/// At each pixel the window is clipped to the image and restricted to valid
/// samples. With weights `w` normalized over those samples, the value is
/// `Σ w (d - d̄)²`, i.e. the windowed variance in m². A pixel whose window has
/// no valid sample is marked invalid.
pub fn variance_map(depth: &DepthFrame, window_size: usize, sigma: f64) -> Result<VarianceMap> {
    variance_map_with(depth, window_size, sigma, WindowMean::Weighted)
}

pub fn variance_map_with(
    depth: &DepthFrame,
    window_size: usize,
    sigma: f64,
    mean: WindowMean,
) -> Result<VarianceMap> {
    check_window(window_size, sigma)?;
    if depth.valid_count() == 0 {
        return Err(Error::EmptyMap("depth frame has no valid pixel".into()));
    }
    let (w, h) = (depth.width(), depth.height());
    let r = (window_size / 2) as isize;
    let kernel: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();

    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            let mut samples: Vec<(f64, f64)> = Vec::with_capacity(window_size * window_size);
            for x in 0..w {
                samples.clear();
                for dy in -r..=r {
                    let yy = y as isize + dy;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let xx = x as isize + dx;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        if let Some(d) = depth.at(xx as usize, yy as usize) {
                            let k = ((dy + r) * (2 * r + 1) + dx + r) as usize;
                            samples.push((kernel[k], d));
                        }
                    }
                }
                row.push(window_variance(&samples, mean));
            }
            row
        })
        .collect();

    let mut values = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            if let Some(v) = v {
                values.set(x, y, v);
                valid.set(x, y, true);
            }
        }
    }
    VarianceMap::new(values, valid, window_size, sigma)
}

fn window_variance(samples: &[(f64, f64)], mean: WindowMean) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    // deviations are taken about the first sample so flat windows give 0 exactly
    let pivot = samples[0].1;
    let wsum: f64 = samples.iter().map(|(w, _)| w).sum();
    let center = match mean {
        WindowMean::Weighted => samples.iter().map(|(w, d)| w * (d - pivot)).sum::<f64>() / wsum,
        WindowMean::Unweighted => {
            samples.iter().map(|(_, d)| d - pivot).sum::<f64>() / samples.len() as f64
        }
    };
    let dev: f64 = samples
        .iter()
        .map(|(w, d)| {
            let e = (d - pivot) - center;
            w * e * e
        })
        .sum();
    Some(dev / wsum)
}

/// Mean of the variance maps at window sizes 5, 7, 9 and 11.
///
/// `sigma = None` uses `window/4` at each scale. A pixel is averaged over the
/// scales where it is valid.
pub fn multiscale_variance(depth: &DepthFrame, sigma: Option<f64>) -> Result<VarianceMap> {
    let largest = MULTISCALE_WINDOWS[MULTISCALE_WINDOWS.len() - 1];
    if depth.width() < largest || depth.height() < largest {
        return Err(Error::invalid(format!(
            "multi-scale variance needs at least {largest}x{largest} pixels, got {}x{}",
            depth.width(),
            depth.height()
        )));
    }
    let maps = MULTISCALE_WINDOWS
        .iter()
        .map(|&win| variance_map(depth, win, sigma.unwrap_or_else(|| default_sigma(win))))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (depth.width(), depth.height());
    let mut values = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            let mut n = 0usize;
            for m in &maps {
                if let Some(v) = m.at(x, y) {
                    sum += v;
                    n += 1;
                }
            }
            if n > 0 {
                values.set(x, y, sum / n as f64);
                valid.set(x, y, true);
            }
        }
    }
    VarianceMap::new(
        values,
        valid,
        largest,
        sigma.unwrap_or_else(|| default_sigma(largest)),
    )
}

fn region_values<'a>(
    vmap: &'a VarianceMap,
    mask: &'a RegionMask,
    regions: &'a [RegionLabel],
) -> impl Iterator<Item = f64> + 'a {
    vmap.values
        .iter()
        .zip(vmap.valid.iter())
        .zip(mask.labels.iter())
        .filter(move |((_, valid), label)| **valid && regions.contains(label))
        .map(|((v, _), _)| *v)
}

fn region_name(regions: &[RegionLabel]) -> String {
    regions
        .iter()
        .map(|r| r.name())
        .collect::<Vec<_>>()
        .join("+")
}

/// Mean variance over the valid pixels of `regions`.
pub fn region_mean(vmap: &VarianceMap, mask: &RegionMask, regions: &[RegionLabel]) -> Result<f64> {
    vmap.values.check_dims(&mask.labels, "region mean")?;
    let (sum, n) =
        region_values(vmap, mask, regions).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyRegion(region_name(regions)));
    }
    Ok(sum / n as f64)
}

/// Largest valid variance over the union of `regions`; used to share bin
/// edges between histograms that will be compared.
pub fn region_max(vmap: &VarianceMap, mask: &RegionMask, regions: &[RegionLabel]) -> Result<f64> {
    vmap.values.check_dims(&mask.labels, "region max")?;
    region_values(vmap, mask, regions)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::EmptyRegion(region_name(regions)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramCurve {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub regions: Vec<RegionLabel>,
}

impl HistogramCurve {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn region_name(&self) -> String {
        region_name(&self.regions)
    }

    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|c| *c as f64 / total).collect()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }
}

/// Histogram of the valid variance values inside `regions`.
///
/// Bins span `[0, max]` of the region unless `range` is given; values
/// outside the range are clamped into the first or last bin so the counts
/// always sum to the region size.
pub fn region_histogram(
    vmap: &VarianceMap,
    mask: &RegionMask,
    regions: &[RegionLabel],
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<HistogramCurve> {
    if bins < 2 {
        return Err(Error::invalid(format!(
            "histogram needs >= 2 bins, got {bins}"
        )));
    }
    vmap.values.check_dims(&mask.labels, "region histogram")?;
    let values: Vec<f64> = region_values(vmap, mask, regions).collect();
    if values.is_empty() {
        return Err(Error::EmptyRegion(region_name(regions)));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("bad histogram range [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        None => {
            let max = values.iter().copied().fold(0.0, f64::max);
            (0.0, if max > 0.0 { max } else { 1.0 })
        }
    };
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    for v in values {
        let k = ((v - lo) / width).floor();
        let k = if k < 0.0 {
            0
        } else {
            (k as usize).min(bins - 1)
        };
        counts[k] += 1;
    }
    Ok(HistogramCurve {
        bin_edges,
        counts,
        regions: regions.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub std: f64,
    /// Sum of squared differences between the sample density histogram and
    /// the fitted pdf at the bin centers.
    pub residual: f64,
}

const FIT_BINS: usize = 32;

/// Maximum-likelihood Gaussian (population std).
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "gaussian fit needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("gaussian fit samples must be finite"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(GaussianFit {
            mean,
            std,
            residual: 0.0,
        });
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / FIT_BINS as f64;
    let mut counts = [0usize; FIT_BINS];
    for s in samples {
        let k = (((s - lo) / width).floor() as usize).min(FIT_BINS - 1);
        counts[k] += 1;
    }
    let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
    let residual = counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let center = lo + width * (k as f64 + 0.5);
            let z = (center - mean) / std;
            let pdf = norm * (-0.5 * z * z).exp();
            let density = *c as f64 / (n * width);
            (density - pdf) * (density - pdf)
        })
        .sum();
    Ok(GaussianFit {
        mean,
        std,
        residual,
    })
}

/// Bhattacharyya distance `-ln Σ √(p q)` of two normalized histograms.
/// Histograms with no overlap give `f64::INFINITY`.
pub fn separability(a: &HistogramCurve, b: &HistogramCurve) -> Result<f64> {
    if a.bin_edges != b.bin_edges || a.counts.len() != b.counts.len() {
        return Err(Error::invalid("histograms must share bin edges"));
    }
    if a.total() == 0 {
        return Err(Error::EmptyRegion(a.region_name()));
    }
    if b.total() == 0 {
        return Err(Error::EmptyRegion(b.region_name()));
    }
    let coefficient: f64 = a
        .normalized()
        .iter()
        .zip(b.normalized())
        .map(|(p, q)| (p * q).sqrt())
        .sum();
    if coefficient <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-coefficient.ln()).max(0.0))
}
