//! Pre/post comparison of stationary precisions through the scale-free edge
//! difference `θ(i,j) = (Ω_a − Ω_b)_ij / ((Ω_a + Ω_b)_ii (Ω_a + Ω_b)_jj)^{1/2}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Posterior summary of `θ` for one unordered pair `i < j` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// The 95% interval excludes zero.
    pub changed: bool,
    /// `|mean| > τ`.
    pub exceeds_tau: bool,
}

/// Edge-difference summary for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDiffReport {
    pub group: String,
    pub tau: f64,
    pub n_draws: usize,
    pub pairs: Vec<PairSummary>,
    pub change_edges: Vec<(usize, usize)>,
    /// Fraction of pairs whose interval excludes zero.
    pub change_proportion: f64,
    /// Fraction of pairs with `|θ̂| > τ`, `θ̂` the posterior mean.
    pub change_score_tau: f64,
    pub warnings: Vec<String>,
}

/// `θ` for one pair of precisions (before, after); the diagonal is zero.
pub fn theta(omega_before: &DMatrix<f64>, omega_after: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if omega_before.shape() != omega_after.shape() || omega_before.nrows() != omega_before.ncols() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", omega_before.shape(), omega_after.shape())));
    }
    let d = omega_before.nrows();
    let diff = omega_after - omega_before;
    let sum = omega_after + omega_before;
    Ok(DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { diff[(i, j)] / (sum[(i, i)] * sum[(j, j)]).sqrt() }))
}

/// Whether a credible interval excludes zero.
pub fn interval_excludes_zero(lo: f64, hi: f64) -> bool {
    lo > 0.0 || hi < 0.0
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Evenly spaced indices selecting `n` of `len` items.
fn thin_indices(len: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * len / n).collect()
}

/// Summarizes `θ` over index-paired draws of the two chains.
///
/// Unequal draw counts are reconciled by thinning the longer chain to the
/// shorter length at evenly spaced indices, with a warning.
pub fn edge_diff(group: &str, before: &[DMatrix<f64>], after: &[DMatrix<f64>], tau: f64) -> Result<EdgeDiffReport> {
    if before.is_empty() || after.is_empty() {
        return Err(Error::Input("edge difference needs draws from both chains".into()));
    }
    let mut warnings = Vec::new();
    let n = before.len().min(after.len());
    if before.len() != after.len() {
        warnings.push(format!(
            "draw counts differ ({} before, {} after); both thinned to {n}",
            before.len(),
            after.len()
        ));
    }
    let ib = thin_indices(before.len(), n);
    let ia = thin_indices(after.len(), n);
    let thetas: Vec<DMatrix<f64>> =
        ib.iter().zip(&ia).map(|(&b, &a)| theta(&before[b], &after[a])).collect::<Result<_>>()?;

    let d = thetas[0].nrows();
    let mut pairs = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    let mut vals = Vec::with_capacity(n);
    for i in 0..d {
        for j in i + 1..d {
            vals.clear();
            vals.extend(thetas.iter().map(|t| t[(i, j)]));
            let mean = vals.iter().sum::<f64>() / n as f64;
            vals.sort_by(f64::total_cmp);
            let lo = quantile(&vals, 0.025);
            let hi = quantile(&vals, 0.975);
            pairs.push(PairSummary {
                i,
                j,
                mean,
                lo,
                hi,
                changed: interval_excludes_zero(lo, hi),
                exceeds_tau: mean.abs() > tau,
            });
        }
    }
    let change_edges: Vec<(usize, usize)> = pairs.iter().filter(|p| p.changed).map(|p| (p.i, p.j)).collect();
    let (change_proportion, change_score_tau) = proportions(&pairs);
    Ok(EdgeDiffReport {
        group: group.to_string(),
        tau,
        n_draws: n,
        pairs,
        change_edges,
        change_proportion,
        change_score_tau,
        warnings,
    })
}

/// `(fraction changed, fraction exceeding τ)` over the listed pairs.
pub fn proportions(pairs: &[PairSummary]) -> (f64, f64) {
    if pairs.is_empty() {
        return (0.0, 0.0);
    }
    let n = pairs.len() as f64;
    let changed = pairs.iter().filter(|p| p.changed).count() as f64;
    let exceed = pairs.iter().filter(|p| p.exceeds_tau).count() as f64;
    (changed / n, exceed / n)
}

/// Fraction of pairs with `|θ| > τ` for a single point estimate of each precision.
pub fn change_score(omega_before: &DMatrix<f64>, omega_after: &DMatrix<f64>, tau: f64) -> Result<f64> {
    let t = theta(omega_before, omega_after)?;
    let d = t.nrows();
    if d < 2 {
        return Ok(0.0);
    }
    let mut count = 0usize;
    for i in 0..d {
        for j in i + 1..d {
            if t[(i, j)].abs() > tau {
                count += 1;
            }
        }
    }
    Ok(count as f64 / (d * (d - 1) / 2) as f64)
}
