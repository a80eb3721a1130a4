use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{sym_inv_sqrt, sym_sqrt, symmetrized};

/// Factorizes a rank-`r` matrix as `W = U Vᵀ` with `Vᵀ B⁻¹ V = I_r`.
///
/// With `M = W B^{−1/2}` and `V = B^{1/2} Q`, `QᵀQ = I`, the constraint holds
/// automatically and `M = U Qᵀ` is a thin SVD. The singular vectors come from
/// symmetric eigendecompositions (`M Mᵀ`, then the projected `r × r` Gram
/// matrix) because nalgebra's SVD loses accuracy on rank-deficient input.
/// The remaining sign freedom is fixed by making the first nonzero entry of
/// each column of `U` positive.
pub fn rank_factorize(w: &DMatrix<f64>, b: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = w.nrows();
    if w.shape() != (d, d) || b.shape() != (d, d) {
        return Err(Error::Dimension(format!("W {:?} and B {:?} must be square and equal", w.shape(), b.shape())));
    }
    let b_half = sym_sqrt(b).ok_or_else(|| Error::Domain("B is not positive semidefinite".into()))?;
    let b_inv_half = sym_inv_sqrt(b).ok_or_else(|| Error::Domain("B is not positive definite".into()))?;
    let m = w * &b_inv_half;

    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE) * d as f64;
    let found = if smax == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tol).count() };
    if found != r {
        return Err(Error::Rank { expected: r, found });
    }

    // leading left singular subspace
    let outer = SymmetricEigen::new(symmetrized(&m * m.transpose()));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| outer.eigenvalues[b].total_cmp(&outer.eigenvalues[a]));
    let p = DMatrix::from_fn(d, r, |i, c| outer.eigenvectors[(i, order[c])]);

    // singular pairs within that subspace
    let n = p.transpose() * &m;
    let inner = SymmetricEigen::new(symmetrized(&n * n.transpose()));
    let mut inner_order: Vec<usize> = (0..r).collect();
    inner_order.sort_by(|&a, &b| inner.eigenvalues[b].total_cmp(&inner.eigenvalues[a]));

    let mut u = DMatrix::zeros(d, r);
    let mut q = DMatrix::zeros(d, r);
    for (c, &i) in inner_order.iter().enumerate() {
        let s = inner.eigenvalues[i].max(0.0).sqrt();
        let rot = inner.eigenvectors.column(i);
        let mut ucol = &p * rot * s;
        let mut qcol = n.transpose() * rot / s;
        let lead = ucol.iter().copied().find(|v| v.abs() > 1e-14 * s.max(1.0)).unwrap_or(1.0);
        if lead < 0.0 {
            ucol.neg_mut();
            qcol.neg_mut();
        }
        u.set_column(c, &ucol);
        q.set_column(c, &qcol);
    }
    let v = b_half * q;
    Ok((u, v))
}
