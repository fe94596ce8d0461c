use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crf::energy::check_instance;
use crate::crf::kernel::ScaledFeatures;
use crate::crf::unary::softmax_neg_into;
use crate::crf::{CrfParams, FeatureField, Labeling, UnaryField};
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 10;
/// Windowed message passing ignores pixel pairs farther apart than this
/// many spatial bandwidths (each dropped pair weighs below `e^-12.5`).
pub const TRUNCATION_SIGMAS: f64 = 5.0;
/// Exact message passing caches the kernel matrix (as f32, 64 MiB at most)
/// up to this many pixels.
const KERNEL_CACHE_PIXELS: usize = 4096;

/// Per-pixel label distributions `Q_i(l)`, pixel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    width: usize,
    height: usize,
    labels: Vec<String>,
    q: Vec<f64>,
}

impl Marginals {
    pub fn new(width: usize, height: usize, labels: Vec<String>, q: Vec<f64>) -> Result<Self> {
        let l = labels.len();
        if l == 0 || q.len() != width * height * l {
            return Err(Error::invalid("marginal layout does not match dimensions"));
        }
        for (i, row) in q.chunks(l).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("pixel {i} is not a distribution")));
            }
        }
        Ok(Self {
            width,
            height,
            labels,
            q,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        let l = self.labels.len();
        &self.q[i * l..(i + 1) * l]
    }
}

/// How messages `Σ_{j≠i} k(f_i, f_j) Q_j(l)` are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessagePassing {
    /// All pairs; quadratic in the pixel count.
    #[default]
    Exact,
    /// Each kernel evaluated only within [`TRUNCATION_SIGMAS`] of its
    /// spatial bandwidth; linear in the pixel count for fixed bandwidths.
    Windowed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanFieldOptions {
    pub iterations: usize,
    pub message_passing: MessagePassing,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            message_passing: MessagePassing::Exact,
        }
    }
}

/// Mean-field inference with exact message passing.
pub fn mean_field_infer(
    unary: &UnaryField,
    feats: &FeatureField,
    params: &CrfParams,
    iterations: usize,
) -> Result<Marginals> {
    mean_field_infer_with(
        unary,
        feats,
        params,
        &MeanFieldOptions {
            iterations,
            message_passing: MessagePassing::Exact,
        },
    )
}

/// Synchronous mean-field updates under Potts compatibility, starting from
/// the unary softmax.
pub fn mean_field_infer_with(
    unary: &UnaryField,
    feats: &FeatureField,
    params: &CrfParams,
    options: &MeanFieldOptions,
) -> Result<Marginals> {
    check_instance(unary, feats, params)?;
    if options.iterations == 0 {
        return Err(Error::invalid("mean-field needs at least one iteration"));
    }
    if unary.potentials().iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("unary potentials must be finite"));
    }
    let n_labels = unary.num_labels();
    let mut q = unary.probabilities();
    if params.w1 == 0.0 && params.w2 == 0.0 {
        return Marginals::new(unary.width(), unary.height(), unary.labels().to_vec(), q);
    }

    let mut messages: Box<dyn MessageFilter> = match options.message_passing {
        MessagePassing::Exact => Box::new(ExactFilter::new(feats, params)),
        MessagePassing::Windowed => Box::new(WindowedFilter::new(feats, params)),
    };
    for _ in 0..options.iterations {
        let m = messages.messages(&q, n_labels);
        q = (0..unary.num_pixels())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mi = &m[i * n_labels..(i + 1) * n_labels];
                let energies: Vec<f64> = unary
                    .pixel(i)
                    .iter()
                    .enumerate()
                    .map(|(l, phi)| {
                        let penalty: f64 = mi
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != l)
                            .map(|(_, v)| v)
                            .sum();
                        phi + penalty
                    })
                    .collect();
                let mut row = Vec::with_capacity(n_labels);
                softmax_neg_into(&energies, &mut row);
                row
            })
            .collect();
    }
    Marginals::new(unary.width(), unary.height(), unary.labels().to_vec(), q)
}

/// Per-pixel argmax; ties go to the lowest label index.
pub fn map_labeling(q: &Marginals) -> Labeling {
    let l = q.num_labels();
    let labels = q
        .values()
        .chunks(l)
        .map(|row| {
            let mut best = 0;
            for (k, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect();
    Labeling::new(q.width(), q.height(), labels).expect("marginal dims")
}

trait MessageFilter {
    /// Weighted kernel sums `Σ_{j≠i} k_ij Q_j(l)`, pixel-major.
    fn messages(&mut self, q: &[f64], n_labels: usize) -> Vec<f64>;
}

struct ExactFilter {
    feats: ScaledFeatures,
    w1: f64,
    w2: f64,
    n: usize,
    /// Row-major combined kernel matrix with a zero diagonal, when small.
    cache: Option<Vec<f32>>,
}

impl ExactFilter {
    fn new(feats: &FeatureField, params: &CrfParams) -> Self {
        let scaled = ScaledFeatures::new(feats, params);
        let n = feats.len();
        let mut filter = Self {
            feats: scaled,
            w1: params.w1,
            w2: params.w2,
            n,
            cache: None,
        };
        if n <= KERNEL_CACHE_PIXELS {
            let cache = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let f = &filter;
                    (0..n).map(move |j| if i == j { 0.0 } else { f.kernel(i, j) as f32 })
                })
                .collect();
            filter.cache = Some(cache);
        }
        filter
    }

    #[inline]
    fn kernel(&self, i: usize, j: usize) -> f64 {
        let (a, s) = self.feats.kernels(i, j);
        self.w1 * a + self.w2 * s
    }
}

impl MessageFilter for ExactFilter {
    fn messages(&mut self, q: &[f64], n_labels: usize) -> Vec<f64> {
        let n = self.n;
        let this = &*self;
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut acc = vec![0.0; n_labels];
                for j in 0..n {
                    let k = match &this.cache {
                        Some(c) => c[i * n + j] as f64,
                        None if i == j => continue,
                        None => this.kernel(i, j),
                    };
                    for (a, qj) in acc.iter_mut().zip(&q[j * n_labels..(j + 1) * n_labels]) {
                        *a += k * qj;
                    }
                }
                acc
            })
            .collect()
    }
}

struct WindowedFilter {
    feats: ScaledFeatures,
    width: usize,
    height: usize,
    w1: f64,
    w2: f64,
    /// Squared cutoffs in pixels².
    cut_alpha: f64,
    cut_delta: f64,
    radius: usize,
}

impl WindowedFilter {
    fn new(feats: &FeatureField, params: &CrfParams) -> Self {
        let cut_alpha = if params.w1 > 0.0 {
            TRUNCATION_SIGMAS * params.theta_alpha
        } else {
            0.0
        };
        let cut_delta = if params.w2 > 0.0 {
            TRUNCATION_SIGMAS * params.theta_delta
        } else {
            0.0
        };
        let radius = cut_alpha.max(cut_delta).floor() as usize;
        Self {
            feats: ScaledFeatures::new(feats, params),
            width: feats.width(),
            height: feats.height(),
            w1: params.w1,
            w2: params.w2,
            cut_alpha: cut_alpha * cut_alpha,
            cut_delta: cut_delta * cut_delta,
            radius,
        }
    }
}

impl MessageFilter for WindowedFilter {
    fn messages(&mut self, q: &[f64], n_labels: usize) -> Vec<f64> {
        let (w, h, r) = (self.width, self.height, self.radius);
        let this = &*self;
        (0..w * h)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (x, y) = (i % w, i / w);
                let mut acc = vec![0.0; n_labels];
                for yj in y.saturating_sub(r)..(y + r + 1).min(h) {
                    for xj in x.saturating_sub(r)..(x + r + 1).min(w) {
                        let j = yj * w + xj;
                        if j == i {
                            continue;
                        }
                        let d2 = (xj as f64 - x as f64).powi(2) + (yj as f64 - y as f64).powi(2);
                        let (a, s) = this.feats.kernels(i, j);
                        let k = if d2 <= this.cut_alpha {
                            this.w1 * a
                        } else {
                            0.0
                        } + if d2 <= this.cut_delta {
                            this.w2 * s
                        } else {
                            0.0
                        };
                        if k == 0.0 {
                            continue;
                        }
                        for (m, qj) in acc.iter_mut().zip(&q[j * n_labels..(j + 1) * n_labels]) {
                            *m += k * qj;
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::merged_labels;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, w: usize, h: usize) -> (UnaryField, FeatureField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = w * h;
        let probs: Vec<f64> = (0..n)
            .flat_map(|_| {
                let r: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                let s: f64 = r.iter().sum();
                r.map(|v| v / s)
            })
            .collect();
        let rgb = (0..n)
            .map(|_| [0.0f64; 3].map(|_| rng.random_range(0.0..255.0)))
            .collect();
        let u = UnaryField::from_probabilities(w, h, merged_labels(), &probs).unwrap();
        let f = FeatureField::from_raw(w, h, rgb, 0, vec![]).unwrap();
        (u, f)
    }

    #[test]
    fn identity_params_return_softmax() {
        let (u, f) = random_instance(3, 6, 5);
        let q = mean_field_infer(&u, &f, &CrfParams::identity(), 7).unwrap();
        assert_eq!(q.values(), &u.probabilities()[..]);
        assert_eq!(map_labeling(&q), u.argmax_labeling());
    }

    #[test]
    fn uniform_unary_stays_uniform() {
        let n = 5 * 4;
        let probs = vec![1.0 / 3.0; n * 3];
        let u = UnaryField::from_probabilities(5, 4, merged_labels(), &probs).unwrap();
        let (_, f) = random_instance(4, 5, 4);
        let q = mean_field_infer(&u, &f, &CrfParams::default(), 5).unwrap();
        for row in q.values().chunks(3) {
            assert_eq!(row[0], row[1]);
            assert_eq!(row[1], row[2]);
        }
    }

    #[test]
    fn rows_are_distributions() {
        let (u, f) = random_instance(5, 7, 7);
        for iters in 1..4 {
            let q = mean_field_infer(&u, &f, &CrfParams::unit_smoothness(), iters).unwrap();
            for row in q.values().chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cached_and_streamed_kernels_agree() {
        let (u, f) = random_instance(6, 6, 6);
        let p = CrfParams {
            theta_alpha: 3.0,
            theta_delta: 2.0,
            ..CrfParams::default()
        };
        let mut cached = ExactFilter::new(&f, &p);
        let q = u.probabilities();
        let a = cached.messages(&q, 3);
        cached.cache = None;
        let b = cached.messages(&q, 3);
        // the cache stores f32
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }

    #[test]
    fn label_permutation_commutes() {
        let (u, f) = random_instance(7, 8, 6);
        let p = CrfParams {
            theta_alpha: 3.0,
            theta_beta: 30.0,
            theta_delta: 2.0,
            ..CrfParams::default()
        };
        let order = [2, 0, 1];
        let q = mean_field_infer(&u, &f, &p, 5).unwrap();
        let qp = mean_field_infer(&u.permute_labels(&order).unwrap(), &f, &p, 5).unwrap();
        for i in 0..u.num_pixels() {
            for (k, &src) in order.iter().enumerate() {
                assert!((qp.pixel(i)[k] - q.pixel(i)[src]).abs() < 1e-12);
            }
        }
        let a = map_labeling(&q);
        let b = map_labeling(&qp);
        for (x, y) in a.labels().iter().zip(b.labels()) {
            assert_eq!(order[*y as usize], *x as usize);
        }
    }

    #[test]
    fn windowed_matches_exact_when_window_covers_image() {
        let (u, f) = random_instance(9, 8, 8);
        let p = CrfParams::default();
        let a = mean_field_infer(&u, &f, &p, 5).unwrap();
        let b = mean_field_infer_with(
            &u,
            &f,
            &p,
            &MeanFieldOptions {
                iterations: 5,
                message_passing: MessagePassing::Windowed,
            },
        )
        .unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn windowed_error_is_small_with_narrow_kernels() {
        let (u, f) = random_instance(10, 32, 32);
        let p = CrfParams {
            w1: 2.0,
            w2: 1.0,
            theta_alpha: 3.0,
            theta_beta: 60.0,
            theta_delta: 1.0,
            ..CrfParams::default()
        };
        let a = mean_field_infer(&u, &f, &p, 10).unwrap();
        let b = mean_field_infer_with(
            &u,
            &f,
            &p,
            &MeanFieldOptions {
                iterations: 10,
                message_passing: MessagePassing::Windowed,
            },
        )
        .unwrap();
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn map_tie_break_and_scale() {
        let q = Marginals::new(2, 1, merged_labels(), vec![0.5, 0.5, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(map_labeling(&q).labels(), &[0, 2]);
        assert!(Marginals::new(1, 1, merged_labels(), vec![0.5, 0.6, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let (u, f) = random_instance(8, 3, 3);
        assert!(mean_field_infer(&u, &f, &CrfParams::default(), 0).is_err());
        let (_, f2) = random_instance(8, 3, 4);
        assert!(mean_field_infer(&u, &f2, &CrfParams::default(), 1).is_err());
    }
}
