use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crf::{
    map_labeling, mean_field_infer_with, CrfParams, FeatureField, Labeling, MeanFieldOptions,
    UnaryField,
};
use crate::error::{Error, Result};
use crate::metrics::iou;

/// Candidate values per parameter. The search covers the full cartesian
/// product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub w1: Vec<f64>,
    pub theta_alpha: Vec<f64>,
    pub theta_beta: Vec<f64>,
    pub theta_gamma: Vec<f64>,
    pub w2: Vec<f64>,
    pub theta_delta: Vec<f64>,
}

impl ParamGrid {
    /// A grid holding just `p`.
    pub fn single(p: CrfParams) -> Self {
        Self {
            w1: vec![p.w1],
            theta_alpha: vec![p.theta_alpha],
            theta_beta: vec![p.theta_beta],
            theta_gamma: vec![p.theta_gamma],
            w2: vec![p.w2],
            theta_delta: vec![p.theta_delta],
        }
    }

    /// All combinations, `w1` varying slowest and `theta_delta` fastest.
    pub fn points(&self) -> Result<Vec<CrfParams>> {
        for (name, values) in [
            ("w1", &self.w1),
            ("theta_alpha", &self.theta_alpha),
            ("theta_beta", &self.theta_beta),
            ("theta_gamma", &self.theta_gamma),
            ("w2", &self.w2),
            ("theta_delta", &self.theta_delta),
        ] {
            if values.is_empty() {
                return Err(Error::invalid(format!("grid dimension {name} is empty")));
            }
        }
        let mut out = Vec::new();
        for &w1 in &self.w1 {
            for &theta_alpha in &self.theta_alpha {
                for &theta_beta in &self.theta_beta {
                    for &theta_gamma in &self.theta_gamma {
                        for &w2 in &self.w2 {
                            for &theta_delta in &self.theta_delta {
                                let p = CrfParams {
                                    w1,
                                    w2,
                                    theta_alpha,
                                    theta_beta,
                                    theta_gamma,
                                    theta_delta,
                                };
                                p.validate()?;
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One validation example.
#[derive(Clone, Debug)]
pub struct Instance {
    pub unary: UnaryField,
    pub feats: FeatureField,
    pub truth: Labeling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: CrfParams,
    /// Mean IoU of the target label over all instances.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridScore,
    /// Every grid point in enumeration order.
    pub table: Vec<GridScore>,
}

/// Mean target-label IoU of refined labelings for one parameter set.
pub fn score_params(
    instances: &[Instance],
    params: &CrfParams,
    target: u8,
    options: &MeanFieldOptions,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::invalid("no instances to score"));
    }
    let mut total = 0.0;
    for inst in instances {
        let q = mean_field_infer_with(&inst.unary, &inst.feats, params, options)?;
        total += iou(&map_labeling(&q), &inst.truth, target)?;
    }
    Ok(total / instances.len() as f64)
}

/// Exhaustive search; the first point with the highest score wins.
pub fn grid_search_params(
    instances: &[Instance],
    grid: &ParamGrid,
    target: u8,
    options: &MeanFieldOptions,
) -> Result<GridSearchResult> {
    let points = grid.points()?;
    if instances.is_empty() {
        return Err(Error::invalid("grid search needs at least one instance"));
    }
    let table = points
        .par_iter()
        .map(|p| {
            Ok(GridScore {
                params: *p,
                score: score_params(instances, p, target, options)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = table[0];
    for s in &table[1..] {
        if s.score > best.score {
            best = *s;
        }
    }
    Ok(GridSearchResult { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::merged_labels;

    fn instance() -> Instance {
        // left half hair (0), right half background (2); one flipped pixel
        let (w, h) = (6, 4);
        let truth: Vec<u8> = (0..w * h).map(|i| if i % w < 3 { 0 } else { 2 }).collect();
        let mut noisy = truth.clone();
        noisy[7] = 2;
        let truth = Labeling::new(w, h, truth).unwrap();
        let unary =
            UnaryField::from_labeling(&Labeling::new(w, h, noisy).unwrap(), merged_labels(), 0.7)
                .unwrap();
        let rgb = (0..w * h)
            .map(|i| if i % w < 3 { [40.0; 3] } else { [200.0; 3] })
            .collect();
        let feats = FeatureField::from_raw(w, h, rgb, 0, vec![]).unwrap();
        Instance {
            unary,
            feats,
            truth,
        }
    }

    #[test]
    fn single_point_grid() {
        let p = CrfParams {
            theta_alpha: 3.0,
            theta_beta: 10.0,
            theta_delta: 3.0,
            ..CrfParams::default()
        };
        let insts = [instance()];
        let r = grid_search_params(
            &insts,
            &ParamGrid::single(p),
            0,
            &MeanFieldOptions::default(),
        )
        .unwrap();
        assert_eq!(r.best.params, p);
        assert_eq!(r.table.len(), 1);
        assert_eq!(
            r.best.score,
            score_params(&insts, &p, 0, &MeanFieldOptions::default()).unwrap()
        );
    }

    #[test]
    fn beats_identity_and_ignores_duplicates() {
        let insts = [instance()];
        let opts = MeanFieldOptions::default();
        let grid = ParamGrid {
            w1: vec![0.0, 1.0],
            theta_alpha: vec![3.0],
            theta_beta: vec![10.0],
            theta_gamma: vec![1.0],
            w2: vec![0.0, 1.0],
            theta_delta: vec![3.0],
        };
        let r = grid_search_params(&insts, &grid, 0, &opts).unwrap();
        assert_eq!(r.table.len(), 4);
        let baseline = r.table[0];
        assert_eq!((baseline.params.w1, baseline.params.w2), (0.0, 0.0));
        assert!(r.best.score >= baseline.score);
        assert!(r.best.score > baseline.score);

        let mut dup = grid.clone();
        dup.w1.push(0.0);
        let r2 = grid_search_params(&insts, &dup, 0, &opts).unwrap();
        assert_eq!(r2.best, r.best);
    }

    #[test]
    fn empty_dimension_is_rejected() {
        let mut g = ParamGrid::single(CrfParams::default());
        g.theta_beta.clear();
        assert!(matches!(
            grid_search_params(&[instance()], &g, 0, &MeanFieldOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
