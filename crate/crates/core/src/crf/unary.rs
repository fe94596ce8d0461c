use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noisemap::RegionLabel;

/// Probabilities are clamped to this floor before `-ln`.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-6;

pub const HAIR: &str = "hair";
pub const FACE: &str = "face";
pub const BACKGROUND: &str = "background";
/// Label order of merged fields.
pub const MERGED_LABELS: [&str; 3] = [HAIR, FACE, BACKGROUND];

pub fn six_class_labels() -> Vec<String> {
    RegionLabel::ALL
        .iter()
        .map(|l| l.name().to_string())
        .collect()
}

pub fn merged_labels() -> Vec<String> {
    MERGED_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Per-pixel, per-label potentials `-ln P(x_i = l)`, stored pixel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnaryField {
    width: usize,
    height: usize,
    labels: Vec<String>,
    potentials: Vec<f64>,
}

impl UnaryField {
    /// `probabilities[i * L + l]` must sum to 1 (within 1e-6) at every pixel.
    pub fn from_probabilities(
        width: usize,
        height: usize,
        labels: Vec<String>,
        probabilities: &[f64],
    ) -> Result<Self> {
        let n_labels = check_shape(width, height, &labels, probabilities.len())?;
        for (i, px) in probabilities.chunks(n_labels).enumerate() {
            if px.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(format!(
                    "pixel {i} has a probability outside [0, 1]"
                )));
            }
            let sum: f64 = px.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "pixel {i} probabilities sum to {sum}"
                )));
            }
        }
        let potentials = probabilities
            .iter()
            .map(|p| -p.max(PROBABILITY_FLOOR).ln())
            .collect();
        Ok(Self {
            width,
            height,
            labels,
            potentials,
        })
    }

    pub fn from_potentials(
        width: usize,
        height: usize,
        labels: Vec<String>,
        potentials: Vec<f64>,
    ) -> Result<Self> {
        check_shape(width, height, &labels, potentials.len())?;
        if potentials.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("unary potentials must be finite"));
        }
        Ok(Self {
            width,
            height,
            labels,
            potentials,
        })
    }

    /// Unary that puts `confidence` on the given label of each pixel and
    /// spreads the rest evenly.
    pub fn from_labeling(
        labeling: &Labeling,
        labels: Vec<String>,
        confidence: f64,
    ) -> Result<Self> {
        let n = labels.len();
        if n < 2 || !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::invalid(
                "need >= 2 labels and a confidence in (0, 1)",
            ));
        }
        let rest = (1.0 - confidence) / (n - 1) as f64;
        let mut probs = Vec::with_capacity(labeling.len() * n);
        for &l in labeling.labels() {
            if l as usize >= n {
                return Err(Error::invalid(format!("label index {l} out of range")));
            }
            probs.extend((0..n).map(|k| if k == l as usize { confidence } else { rest }));
        }
        Self::from_probabilities(labeling.width(), labeling.height(), labels, &probs)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> &[f64] {
        let l = self.labels.len();
        &self.potentials[i * l..(i + 1) * l]
    }

    /// `exp(-φ)` renormalized per pixel.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.potentials.len());
        for i in 0..self.num_pixels() {
            softmax_neg_into(self.pixel(i), &mut out);
        }
        out
    }

    /// Lowest-potential label per pixel, ties to the lowest index.
    pub fn argmax_labeling(&self) -> Labeling {
        let labels = (0..self.num_pixels())
            .map(|i| argmin(self.pixel(i)) as u8)
            .collect();
        Labeling {
            width: self.width,
            height: self.height,
            labels,
        }
    }

    /// Reorders the label axis: output label `k` is input label `order[k]`.
    pub fn permute_labels(&self, order: &[usize]) -> Result<Self> {
        let n = self.num_labels();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&k| k >= n || std::mem::replace(&mut seen[k], true))
        {
            return Err(Error::invalid("label order must be a permutation"));
        }
        let labels = order.iter().map(|&k| self.labels[k].clone()).collect();
        let potentials = (0..self.num_pixels())
            .flat_map(|i| order.iter().map(move |&k| self.potentials[i * n + k]))
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            labels,
            potentials,
        })
    }
}

fn check_shape(width: usize, height: usize, labels: &[String], len: usize) -> Result<usize> {
    let n = labels.len();
    if n == 0 || n > u8::MAX as usize {
        return Err(Error::invalid(format!(
            "label count {n} must be in 1..=255"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("unary field must be non-empty"));
    }
    if len != width * height * n {
        return Err(Error::invalid(format!(
            "unary data has {len} values, expected {width}x{height}x{n}"
        )));
    }
    Ok(n)
}

/// Appends the normalized `exp(-e)` of one pixel's energies.
pub(crate) fn softmax_neg_into(energies: &[f64], out: &mut Vec<f64>) {
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let start = out.len();
    let mut sum = 0.0;
    for e in energies {
        let v = (-(e - min)).exp();
        sum += v;
        out.push(v);
    }
    for v in &mut out[start..] {
        *v /= sum;
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

/// Per-pixel label assignment, stored as indices into a label list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl Labeling {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid(format!(
                "labeling has {} entries, expected {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_grid(grid: &Grid<u8>) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            labels: grid.as_slice().to_vec(),
        }
    }

    pub fn to_grid(&self) -> Grid<u8> {
        Grid::from_vec(self.width, self.height, self.labels.clone()).expect("labeling dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn same_dims(&self, other: &Labeling) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Collapses the six-region taxonomy into hair / face / background by
/// summing the four hair probabilities.
pub fn merge_hair_labels(six_class: &UnaryField) -> Result<UnaryField> {
    let index = |name: &str| six_class.label_index(name);
    let mut sorted: Vec<&str> = six_class.labels().iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let mut expected: Vec<String> = six_class_labels();
    expected.sort_unstable();
    if sorted != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::invalid(format!(
            "expected the six-region labels {:?}, got {:?}",
            six_class_labels(),
            six_class.labels()
        )));
    }
    let hair: Vec<usize> = RegionLabel::HAIR
        .iter()
        .map(|l| index(l.name()).unwrap())
        .collect();
    let face = index(FACE).unwrap();
    let background = index(BACKGROUND).unwrap();

    let probs = six_class.probabilities();
    let n = six_class.num_labels();
    let mut merged = Vec::with_capacity(six_class.num_pixels() * 3);
    for px in probs.chunks(n) {
        merged.push(hair.iter().map(|&k| px[k]).sum());
        merged.push(px[face]);
        merged.push(px[background]);
    }
    UnaryField::from_probabilities(
        six_class.width(),
        six_class.height(),
        merged_labels(),
        &merged,
    )
}

/// Maps six-region label ids (in [`RegionLabel`] id order) onto the merged
/// hair / face / background indices.
pub fn merge_region_labeling(ids: &Grid<u8>) -> Result<Labeling> {
    let labels = ids
        .iter()
        .map(|id| {
            Ok(match RegionLabel::from_id(*id)? {
                RegionLabel::Background => 2,
                RegionLabel::Face => 1,
                _ => 0,
            })
        })
        .collect::<Result<Vec<u8>>>()?;
    Labeling::new(ids.width(), ids.height(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn six(probs: &[f64]) -> UnaryField {
        UnaryField::from_probabilities(1, 1, six_class_labels(), probs).unwrap()
    }

    #[test]
    fn merge_sums_hair_probability() {
        // background, face, top, back, left, right
        let u = six(&[0.1, 0.3, 0.2, 0.2, 0.1, 0.1]);
        let m = merge_hair_labels(&u).unwrap();
        let p = m.probabilities();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.1, epsilon = 1e-12);
        assert_eq!(m.labels(), &merged_labels()[..]);
    }

    #[test]
    fn one_hot_face_stays_face() {
        let u = six(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let m = merge_hair_labels(&u).unwrap();
        let p = m.probabilities();
        assert!(p[1] > 1.0 - 1e-9);
        assert_eq!(m.argmax_labeling().labels(), &[1]);
    }

    #[test]
    fn merged_rows_sum_to_one() {
        let probs: Vec<f64> = (0..20)
            .flat_map(|i| {
                let raw: Vec<f64> = (0..6)
                    .map(|k| ((i * 7 + k * 3) % 11) as f64 + 0.5)
                    .collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(move |r| r / s)
            })
            .collect();
        let u = UnaryField::from_probabilities(5, 4, six_class_labels(), &probs).unwrap();
        let m = merge_hair_labels(&u).unwrap();
        for px in m.probabilities().chunks(3) {
            assert_abs_diff_eq!(px.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn merge_rejects_wrong_labels() {
        let u = UnaryField::from_probabilities(1, 1, merged_labels(), &[0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            merge_hair_labels(&u),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn construction_checks() {
        let labels = merged_labels();
        assert!(UnaryField::from_probabilities(1, 1, labels.clone(), &[0.2, 0.3, 0.4]).is_err());
        assert!(UnaryField::from_probabilities(1, 1, labels.clone(), &[0.2, 0.3]).is_err());
        let u = UnaryField::from_probabilities(1, 1, labels.clone(), &[0.0, 0.5, 0.5]).unwrap();
        assert!(u.potentials().iter().all(|p| p.is_finite()));
        assert_abs_diff_eq!(u.potentials()[0], -PROBABILITY_FLOOR.ln());
        assert!(UnaryField::from_potentials(1, 1, labels, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        let u = UnaryField::from_probabilities(
            2,
            1,
            merged_labels(),
            &[0.4, 0.4, 0.2, 0.1, 0.45, 0.45],
        )
        .unwrap();
        assert_eq!(u.argmax_labeling().labels(), &[0, 1]);
    }

    #[test]
    fn merged_ground_truth() {
        let ids = Grid::from_vec(6, 1, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(
            merge_region_labeling(&ids).unwrap().labels(),
            &[2, 1, 0, 0, 0, 0]
        );
    }
}
