//! Per-label IoU and mean IoU.
//!
//! A label absent from both prediction and ground truth scores 1.0, so mIoU
//! stays defined on sparse scenes; [`EvalReport`] lists such labels.

use serde::{Deserialize, Serialize};

use crate::crf::Labeling;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub intersection: u64,
    pub union: u64,
}

impl LabelCounts {
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

pub fn label_counts(pred: &Labeling, gt: &Labeling, label: u8) -> Result<LabelCounts> {
    if !pred.same_dims(gt) {
        return Err(Error::invalid(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut counts = LabelCounts {
        intersection: 0,
        union: 0,
    };
    for (p, g) in pred.labels().iter().zip(gt.labels()) {
        let (a, b) = (*p == label, *g == label);
        counts.intersection += (a && b) as u64;
        counts.union += (a || b) as u64;
    }
    Ok(counts)
}

pub fn iou(pred: &Labeling, gt: &Labeling, label: u8) -> Result<f64> {
    Ok(label_counts(pred, gt, label)?.iou())
}

/// Unweighted mean of [`iou`] over `labels`.
pub fn miou(pred: &Labeling, gt: &Labeling, labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("mIoU needs a non-empty label set"));
    }
    let mut sum = 0.0;
    for &l in labels {
        sum += iou(pred, gt, l)?;
    }
    Ok(sum / labels.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub index: u8,
    pub iou: f64,
    pub intersection: u64,
    pub union: u64,
    /// True when the label occurs in neither labeling (IoU defined as 1).
    pub absent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_label: Vec<LabelScore>,
    pub miou: f64,
}

impl EvalReport {
    /// Scores every label in `names` (index = position).
    pub fn evaluate(pred: &Labeling, gt: &Labeling, names: &[String]) -> Result<Self> {
        if names.is_empty() || names.len() > u8::MAX as usize + 1 {
            return Err(Error::invalid("label list must hold 1..=256 names"));
        }
        let per_label = names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let c = label_counts(pred, gt, k as u8)?;
                Ok(LabelScore {
                    label: name.clone(),
                    index: k as u8,
                    iou: c.iou(),
                    intersection: c.intersection,
                    union: c.union,
                    absent: c.union == 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let miou = per_label.iter().map(|s| s.iou).sum::<f64>() / per_label.len() as f64;
        Ok(Self { per_label, miou })
    }

    pub fn get(&self, label: &str) -> Option<&LabelScore> {
        self.per_label.iter().find(|s| s.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab(w: usize, h: usize, v: Vec<u8>) -> Labeling {
        Labeling::new(w, h, v).unwrap()
    }

    #[test]
    fn examples() {
        let gt = lab(10, 20, (0..200).map(|i| (i < 100) as u8).collect());
        assert_eq!(iou(&gt, &gt, 1).unwrap(), 1.0);
        let half = lab(10, 20, (0..200).map(|i| (i < 50) as u8).collect());
        assert_eq!(iou(&half, &gt, 1).unwrap(), 0.5);
        let disjoint = lab(10, 20, (0..200).map(|i| (i >= 100) as u8).collect());
        assert_eq!(iou(&disjoint, &gt, 1).unwrap(), 0.0);
        assert_eq!(iou(&gt, &gt, 7).unwrap(), 1.0);
        assert_eq!(miou(&disjoint, &gt, &[1, 7]).unwrap(), 0.5);
        assert!(miou(&gt, &gt, &[]).is_err());
        assert!(iou(&gt, &lab(20, 10, vec![0; 200]), 0).is_err());
    }

    #[test]
    fn report_flags_absent_labels() {
        let a = lab(2, 1, vec![0, 0]);
        let r = EvalReport::evaluate(&a, &a, &["hair".into(), "face".into()]).unwrap();
        assert_eq!(r.miou, 1.0);
        assert!(!r.get("hair").unwrap().absent);
        assert!(r.get("face").unwrap().absent);
    }

    proptest! {
        #[test]
        fn symmetric_and_relabel_invariant(
            a in proptest::collection::vec(0u8..4, 64),
            b in proptest::collection::vec(0u8..4, 64),
            label in 0u8..4,
        ) {
            let (pa, pb) = (lab(8, 8, a.clone()), lab(8, 8, b.clone()));
            let v = iou(&pa, &pb, label).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&pb, &pa, label).unwrap());
            let perm = [2u8, 3, 1, 0];
            let ra = lab(8, 8, a.iter().map(|x| perm[*x as usize]).collect());
            let rb = lab(8, 8, b.iter().map(|x| perm[*x as usize]).collect());
            prop_assert_eq!(v, iou(&ra, &rb, perm[label as usize]).unwrap());
            let m1 = miou(&pa, &pb, &[0, 1, 2, 3]).unwrap();
            let m2 = miou(&pa, &pb, &[3, 1, 0, 2]).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-15);
        }
    }
}
