//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor used when checking positive (semi)definiteness.
pub const SPD_REL_TOL: f64 = 1e-10;

/// Replaces `m` by `(m + mᵀ)/2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut m = m;
    symmetrize(&mut m);
    m
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrized(m.clone())).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Spectral norm of a symmetric matrix via its eigenvalues.
pub fn op_norm_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().fold(0.0_f64, |acc, &e| acc.max(e.abs()))
}

/// Smallest eigenvalue must exceed `-SPD_REL_TOL * ‖m‖`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    let ev = sym_eigenvalues(m);
    let scale = ev.iter().fold(0.0_f64, |a, &e| a.max(e.abs()));
    ev.first().is_none_or(|&lo| lo > -SPD_REL_TOL * scale.max(1.0))
}

fn map_spectrum(m: &DMatrix<f64>, f: impl Fn(f64) -> f64, floor: f64) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrized(m.clone()));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &e| a.max(e.abs()));
    if eig.eigenvalues.iter().any(|&e| e <= floor * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| f(e)));
    let q = &eig.eigenvectors;
    Some(symmetrized(q * DMatrix::from_diagonal(&mapped) * q.transpose()))
}

/// Unique symmetric positive square root of an SPD matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrized(m.clone()));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &e| a.max(e.abs()));
    if eig.eigenvalues.iter().any(|&e| e < -SPD_REL_TOL * scale.max(1.0)) {
        return None;
    }
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()));
    let q = &eig.eigenvectors;
    Some(symmetrized(q * DMatrix::from_diagonal(&mapped) * q.transpose()))
}

/// Inverse of the symmetric square root; `None` unless strictly positive definite.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    map_spectrum(m, |e| 1.0 / e.sqrt(), 1e-14)
}

/// Cholesky factorization with bounded diagonal jitter.
///
/// Tries the plain factorization first, then adds `1e-12·tr/d` and grows it by
/// a factor of ten until it either succeeds or exceeds `1e-6·tr/d`.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let sym = symmetrized(m.clone());
    if let Some(ch) = Cholesky::new(sym.clone()) {
        return Some((ch, 0.0));
    }
    let n = sym.nrows().max(1) as f64;
    let base = (sym.trace() / n).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-12 * base;
    while jitter <= 1e-6 * base {
        let mut shifted = sym.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            return Some((ch, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// Log-determinant of an SPD matrix via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let ch = Cholesky::new(symmetrized(m.clone()))
        .ok_or_else(|| Error::Conditioning { lag: 0, detail: "matrix is not positive definite".into() })?;
    Ok(2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Relative Frobenius distance ‖a − b‖_F / ‖b‖_F.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Sample covariance of the rows of `x` about the supplied mean (or zero).
pub fn row_covariance(x: &DMatrix<f64>, centered: bool) -> DMatrix<f64> {
    let t = x.nrows();
    let d = x.ncols();
    if t == 0 {
        return DMatrix::zeros(d, d);
    }
    let mut xc = x.clone();
    if centered {
        for j in 0..d {
            let mean = x.column(j).mean();
            xc.column_mut(j).add_scalar_mut(-mean);
        }
    }
    symmetrized(xc.transpose() * &xc / t as f64)
}
