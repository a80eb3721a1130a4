use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::likelihood::Sample;
use crate::linalg::{row_covariance, symmetrize};
use crate::varcore::{companion_spectral_radius, solve_stationary_covariance};

/// Ridge least-squares VAR(1) fit and the precision it implies.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub a1: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    /// Set when the fitted `A_1` is not causal and `omega` fell back to the
    /// inverse sample covariance.
    pub warning: Option<String>,
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut inv = m.clone().cholesky()?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// Precision implied by `(A_1, Σ)`, or `fallback⁻¹` with a warning when `A_1`
/// is not causal.
pub fn implied_precision(
    a1: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    fallback: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Option<String>)> {
    let rho = companion_spectral_radius(std::slice::from_ref(a1))?;
    if rho < 1.0 {
        let g0 = solve_stationary_covariance(std::slice::from_ref(a1), sigma)?;
        if let Some(omega) = spd_inverse(&g0) {
            return Ok((omega, None));
        }
    }
    let omega = spd_inverse(fallback).ok_or(Error::Singular { lag: 0 })?;
    Ok((
        omega,
        Some(format!("fitted VAR(1) is not causal (spectral radius {rho:.4}); using the inverse sample covariance")),
    ))
}

/// Fits `X_t = A_1 X_{t−1} + Z_t` by ridge least squares.
///
/// With `ridge = 0` a singular design is an error. The fallback covariance for
/// the non-causal branch is the sample covariance plus `ridge·I`.
pub fn fit_var1_baseline(sample: &Sample, ridge: f64) -> Result<BaselineFit> {
    let x = sample.data();
    let t = sample.len();
    let d = sample.dim();
    if t < 2 {
        return Err(Error::Input("need at least two time points".into()));
    }
    let past = x.rows(0, t - 1);
    let next = x.rows(1, t - 1);
    let mut gram = past.transpose() * past;
    for i in 0..d {
        gram[(i, i)] += ridge;
    }
    let cross = next.transpose() * past;
    let gram_inv = gram.cholesky().ok_or(Error::Singular { lag: 1 })?.inverse();
    let a1 = cross * gram_inv;
    let resid = next - past * a1.transpose();
    let sigma = row_covariance(&resid, false);
    let mut fallback = row_covariance(x, false);
    for i in 0..d {
        fallback[(i, i)] += ridge;
    }
    let (omega, warning) = implied_precision(&a1, &sigma, &fallback)?;
    Ok(BaselineFit { a1, sigma, omega, warning })
}

/// Inverse of the sample covariance (the naive i.i.d. estimate).
pub fn naive_precision(sample: &Sample) -> Result<DMatrix<f64>> {
    spd_inverse(&row_covariance(sample.data(), false)).ok_or(Error::Singular { lag: 0 })
}
