use nalgebra::DMatrix;

use crate::priors::{column_layout, HyperState};
use crate::varcore::ReducedRankVarParams;

/// Result of a pruning pass.
#[derive(Debug, Clone)]
pub struct Pruned {
    pub params: ReducedRankVarParams,
    pub hyper: HyperState,
    /// Keep flag for each global column of the pre-pruning layout.
    pub keep: Vec<bool>,
    pub warning: Option<String>,
}

/// Drops update columns whose sum of squares is below `threshold`.
///
/// `K_j` loses the same columns as `L_j`, trailing lags left with no columns
/// are removed, and the hyperparameters are remapped. If nothing survives, the
/// single strongest column is kept as a one-lag rank-one model.
pub fn prune_ranks(params: &ReducedRankVarParams, hyper: &HyperState, threshold: f64) -> Pruned {
    let layout = column_layout(&params.ranks());
    let ss: Vec<f64> = layout.iter().map(|&(j, c)| params.l[j].column(c).norm_squared()).collect();
    let mut keep: Vec<bool> = ss.iter().map(|&s| s >= threshold).collect();
    let mut warning = None;
    if !keep.iter().any(|&k| k) && !layout.is_empty() {
        let best = (0..ss.len()).max_by(|&a, &b| ss[a].total_cmp(&ss[b])).expect("nonempty");
        keep[best] = true;
        warning = Some(format!(
            "every update column fell below the pruning threshold {threshold}; keeping a one-lag rank-one model"
        ));
    }

    let d = params.dim();
    let p = params.order();
    let mut l: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let cols: Vec<usize> =
            layout.iter().enumerate().filter(|&(g, &(jj, _))| jj == j && keep[g]).map(|(_, &(_, c))| c).collect();
        l.push(params.l[j].select_columns(&cols));
        let mut kj = params.k[j].select_columns(&cols);
        let n = kj.norm();
        if n > 0.0 {
            kj /= n;
        }
        k.push(kj);
    }

    let mut hyper = hyper.retain_columns(&keep);
    let last = l.iter().rposition(|m| m.ncols() > 0);
    let new_p = match last {
        Some(j) => j + 1,
        None => 1,
    };
    if last.is_none() {
        // no columns at all (p = 0 columns to begin with): keep a single empty lag
        l = vec![DMatrix::zeros(d, 0)];
        k = vec![DMatrix::zeros(d, 0)];
    }
    // a minimal model found deep in the stack still lives at its own lag; move it to lag 1
    if warning.is_some() {
        let j = last.expect("a column was kept");
        l = vec![l[j].clone()];
        k = vec![k[j].clone()];
        let mut h = hyper.clone();
        h.delta_lag = vec![h.delta_lag[j].clone()];
        h.recompute();
        hyper = h;
    } else {
        l.truncate(new_p);
        k.truncate(new_p);
        hyper.truncate_lags(new_p);
    }
    let params = ReducedRankVarParams { e1: params.e1.clone(), f: params.f.clone(), lambda: params.lambda, l, k };
    Pruned { params, hyper, keep, warning }
}
