use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;

fn check_coefficients(a: &[DMatrix<f64>]) -> Result<usize> {
    let first = a.first().ok_or_else(|| Error::Contract("at least one coefficient matrix is required".into()))?;
    let d = first.nrows();
    for (i, m) in a.iter().enumerate() {
        if m.shape() != (d, d) {
            return Err(Error::Contract(format!(
                "coefficient {} has shape {:?}, expected ({d}, {d})",
                i + 1,
                m.shape()
            )));
        }
    }
    Ok(d)
}

/// The `dp × dp` companion matrix of `X_t = Σ A_k X_{t−k} + Z_t`.
pub fn companion_matrix(a: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let d = check_coefficients(a)?;
    let p = a.len();
    let mut f = DMatrix::zeros(d * p, d * p);
    for (k, ak) in a.iter().enumerate() {
        f.view_mut((0, k * d), (d, d)).copy_from(ak);
    }
    for k in 1..p {
        for i in 0..d {
            f[(k * d + i, (k - 1) * d + i)] = 1.0;
        }
    }
    Ok(f)
}

/// Spectral radius of the companion matrix; `< 1` means causal.
pub fn companion_spectral_radius(a: &[DMatrix<f64>]) -> Result<f64> {
    let f = companion_matrix(a)?;
    if f.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let eig = eigenvalues(&f)
        .ok_or_else(|| Error::Conditioning { lag: 0, detail: "companion eigenvalues did not converge".into() })?;
    Ok(eig.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())))
}

/// Diagonal similarity scaling that equalizes row and column norms.
fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut b = m.clone();
    for _ in 0..20 {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&k| k != i).map(|k| b[(k, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&k| k != i).map(|k| b[(i, k)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let g = (r / c).sqrt().clamp(1e-8, 1e8);
            if (g - 1.0).abs() > 0.05 {
                done = false;
                b.column_mut(i).scale_mut(g);
                b.row_mut(i).scale_mut(1.0 / g);
            }
        }
        if done {
            break;
        }
    }
    b
}

/// Eigenvalues by a bounded Schur iteration, retried on similar matrices.
fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<nalgebra::Complex<f64>>> {
    let max_iter = 200 * m.nrows().max(10);
    let tries = [m.clone(), balance(m), m.transpose(), balance(&m.transpose())];
    tries
        .into_iter()
        .find_map(|c| c.try_schur(f64::EPSILON, max_iter))
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
}

/// Stationary covariance `Γ(0)` of a causal VAR(p).
///
/// Solves the companion-form discrete Lyapunov equation `P = F P Fᵀ + Q`
/// (with `Q = diag(Σ, 0, …)`) by squaring-and-doubling and returns the
/// leading `d × d` block of `P`.
pub fn solve_stationary_covariance(a: &[DMatrix<f64>], sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = check_coefficients(a)?;
    if sigma.shape() != (d, d) {
        return Err(Error::Contract(format!("Σ has shape {:?}, expected ({d}, {d})", sigma.shape())));
    }
    let radius = companion_spectral_radius(a)?;
    if !(radius < 1.0) {
        return Err(Error::NonCausal { radius });
    }
    let p = a.len();
    let mut f = companion_matrix(a)?;
    let mut acc = DMatrix::zeros(d * p, d * p);
    acc.view_mut((0, 0), (d, d)).copy_from(sigma);
    for _ in 0..200 {
        let inc = &f * &acc * f.transpose();
        let done = inc.norm() <= 1e-17 * acc.norm();
        acc += inc;
        if done {
            let mut g0 = acc.view((0, 0), (d, d)).into_owned();
            symmetrize(&mut g0);
            return Ok(g0);
        }
        f = &f * &f;
    }
    Err(Error::Conditioning { lag: 0, detail: format!("Lyapunov doubling did not converge (radius {radius})") })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn radius_examples() {
        assert_eq!(companion_spectral_radius(&[DMatrix::zeros(3, 3)]).unwrap(), 0.0);
        assert!((companion_spectral_radius(&[scalar(0.5)]).unwrap() - 0.5).abs() < 1e-12);
        // roots of z² − 0.5 z − 0.3
        let oracle = (0.5 + (0.25_f64 + 1.2).sqrt()) / 2.0;
        let rho = companion_spectral_radius(&[scalar(0.5), scalar(0.3)]).unwrap();
        assert!((rho - oracle).abs() < 1e-12);
        assert!((rho - 0.852_079).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let r = companion_spectral_radius(&[DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)]);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn scalar_ar1_variance() {
        let g = solve_stationary_covariance(&[scalar(0.5)], &scalar(0.75)).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_coefficients_return_sigma() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let g = solve_stationary_covariance(&[DMatrix::zeros(2, 2)], &s).unwrap();
        assert!((g - s).norm() < 1e-15);
    }

    #[test]
    fn explosive_is_rejected() {
        let r = solve_stationary_covariance(&[scalar(1.05)], &scalar(1.0));
        assert!(matches!(r, Err(Error::NonCausal { .. })));
    }
}
