use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean squared entrywise error over all `d²` entries.
pub fn mse_precision(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::Dimension(format!("estimate {:?} vs truth {:?}", est.shape(), truth.shape())));
    }
    Ok((est - truth).norm_squared() / est.len() as f64)
}

/// ROC curve over the upper-triangle pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC of `scores` against the nonzero off-diagonal pattern of `truth`.
///
/// Pairs are flagged when their score is at least the threshold; thresholds
/// sweep the distinct scores from high to low, so tied scores enter together.
/// AUC is the trapezoid area.
pub fn roc_points(scores: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<Roc> {
    if scores.shape() != truth.shape() || scores.nrows() != scores.ncols() {
        return Err(Error::Dimension(format!("scores {:?} vs truth {:?}", scores.shape(), truth.shape())));
    }
    let d = scores.nrows();
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            pairs.push((scores[(i, j)], truth[(i, j)] != 0.0));
        }
    }
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Input("ROC needs both true edges and non-edges".into()));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(Roc { points, auc })
}
