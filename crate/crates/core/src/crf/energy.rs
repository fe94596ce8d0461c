use rayon::prelude::*;

use crate::crf::{pairwise_kernel, CrfParams, FeatureField, Labeling, UnaryField};
use crate::error::{Error, Result};

/// Largest instance (in pixels) the exact energy accepts by default.
pub const DEFAULT_ENERGY_CAP: usize = 64 * 64;

/// Exact Gibbs energy with Potts compatibility, capped at
/// [`DEFAULT_ENERGY_CAP`] pixels.
pub fn gibbs_energy(
    labeling: &Labeling,
    unary: &UnaryField,
    feats: &FeatureField,
    params: &CrfParams,
) -> Result<f64> {
    gibbs_energy_capped(labeling, unary, feats, params, DEFAULT_ENERGY_CAP)
}

/// `Σ φ(x_i) + Σ_{i<j} [x_i ≠ x_j] k(f_i, f_j)`, evaluated over all pairs.
pub fn gibbs_energy_capped(
    labeling: &Labeling,
    unary: &UnaryField,
    feats: &FeatureField,
    params: &CrfParams,
    cap: usize,
) -> Result<f64> {
    check_instance(unary, feats, params)?;
    if labeling.width() != unary.width() || labeling.height() != unary.height() {
        return Err(Error::invalid("labeling and unary dimensions differ"));
    }
    let n = labeling.len();
    if n > cap {
        return Err(Error::SizeCap { pixels: n, cap });
    }
    let labels = labeling.labels();
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= unary.num_labels()) {
        return Err(Error::invalid(format!("label index {bad} out of range")));
    }

    let unary_sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| unary.pixel(i)[l as usize])
        .sum();
    // Per-row partial sums collected in order keep the total independent
    // of the thread count.
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = feats.pixel(i);
            ((i + 1)..n)
                .filter(|&j| labels[i] != labels[j])
                .map(|j| pairwise_kernel(&fi, &feats.pixel(j), params))
                .sum()
        })
        .collect();
    Ok(unary_sum + rows.iter().sum::<f64>())
}

pub(crate) fn check_instance(
    unary: &UnaryField,
    feats: &FeatureField,
    params: &CrfParams,
) -> Result<()> {
    params.validate()?;
    if unary.width() != feats.width() || unary.height() != feats.height() {
        return Err(Error::invalid(format!(
            "unary is {}x{} but features are {}x{}",
            unary.width(),
            unary.height(),
            feats.width(),
            feats.height()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::merged_labels;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_pixel() -> (UnaryField, FeatureField) {
        let u =
            UnaryField::from_probabilities(2, 1, merged_labels(), &[0.5, 0.3, 0.2, 0.1, 0.1, 0.8])
                .unwrap();
        let f = FeatureField::from_raw(
            2,
            1,
            vec![[10.0, 0.0, 0.0], [20.0, 5.0, 0.0]],
            1,
            vec![0.3, -0.4],
        )
        .unwrap();
        (u, f)
    }

    #[test]
    fn two_pixel_examples() {
        let (u, f) = two_pixel();
        let p = CrfParams::default();
        let same = Labeling::new(2, 1, vec![0, 0]).unwrap();
        let e = gibbs_energy(&same, &u, &f, &p).unwrap();
        assert_eq!(e, -(0.5f64.ln()) - 0.1f64.ln());
        let diff = Labeling::new(2, 1, vec![0, 2]).unwrap();
        let e = gibbs_energy(&diff, &u, &f, &p).unwrap();
        let k = pairwise_kernel(&f.pixel(0), &f.pixel(1), &p);
        assert!((e - (-(0.5f64.ln()) - 0.8f64.ln() + k)).abs() < 1e-15);
    }

    #[test]
    fn size_cap_is_explicit() {
        let (u, f) = two_pixel();
        let l = Labeling::new(2, 1, vec![0, 1]).unwrap();
        let err = gibbs_energy_capped(&l, &u, &f, &CrfParams::default(), 1).unwrap_err();
        assert!(matches!(err, Error::SizeCap { pixels: 2, cap: 1 }));
    }

    #[test]
    fn bad_labels_and_dims() {
        let (u, f) = two_pixel();
        let p = CrfParams::default();
        assert!(gibbs_energy(&Labeling::new(2, 1, vec![0, 3]).unwrap(), &u, &f, &p).is_err());
        assert!(gibbs_energy(&Labeling::new(1, 2, vec![0, 1]).unwrap(), &u, &f, &p).is_err());
    }

    // Independent evaluator: unordered pair loop over (x, y) coordinates with
    // the kernel written out term by term.
    fn brute_force(
        lab: &[u8],
        w: usize,
        probs: &[f64],
        rgb: &[[f64; 3]],
        c: &[f64],
        p: &CrfParams,
    ) -> f64 {
        let n = lab.len();
        let mut e = 0.0;
        for i in 0..n {
            e += -(probs[i * 3 + lab[i] as usize].max(1e-12)).ln();
        }
        for i in 0..n {
            for j in 0..n {
                if j <= i || lab[i] == lab[j] {
                    continue;
                }
                let (xi, yi) = ((i % w) as f64, (i / w) as f64);
                let (xj, yj) = ((j % w) as f64, (j / w) as f64);
                let pos = (xi - xj).powi(2) + (yi - yj).powi(2);
                let col = (0..3).map(|k| (rgb[i][k] - rgb[j][k]).powi(2)).sum::<f64>();
                let extra = (c[i] - c[j]).powi(2);
                e +=
                    p.w1 * f64::exp(
                        -pos / (2.0 * p.theta_alpha * p.theta_alpha)
                            - col / (2.0 * p.theta_beta * p.theta_beta)
                            - extra / (2.0 * p.theta_gamma * p.theta_gamma),
                    ) + p.w2 * f64::exp(-pos / (2.0 * p.theta_delta * p.theta_delta));
            }
        }
        e
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let (w, h) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let n = w * h;
            let probs: Vec<f64> = (0..n)
                .flat_map(|_| {
                    let r: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                    let s: f64 = r.iter().sum();
                    r.map(|v| v / s)
                })
                .collect();
            let rgb: Vec<[f64; 3]> = (0..n)
                .map(|_| [0.0; 3].map(|_: f64| rng.random_range(0.0..255.0)))
                .collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lab: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let p = CrfParams {
                w1: rng.random_range(0.0..3.0),
                w2: rng.random_range(0.0..3.0),
                theta_alpha: rng.random_range(0.5..5.0),
                theta_beta: rng.random_range(5.0..80.0),
                theta_gamma: rng.random_range(0.2..3.0),
                theta_delta: rng.random_range(0.5..5.0),
            };
            let u = UnaryField::from_probabilities(w, h, merged_labels(), &probs).unwrap();
            let f = FeatureField::from_raw(w, h, rgb.clone(), 1, c.clone()).unwrap();
            let l = Labeling::new(w, h, lab.clone()).unwrap();
            let e = gibbs_energy(&l, &u, &f, &p).unwrap();
            let oracle = brute_force(&lab, w, &probs, &rgb, &c, &p);
            assert!((e - oracle).abs() <= 1e-10, "{e} vs {oracle}");
        }
    }
}
