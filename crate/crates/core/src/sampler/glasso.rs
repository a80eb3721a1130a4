//! Warm-start precision estimates.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{cholesky_jittered, symmetrize};

/// Graphical lasso by block coordinate descent.
///
/// Minimizes `−log det Θ + tr(SΘ) + ρ Σ_{i≠j} |θ_ij|`. Returns `None` if the
/// result is not positive definite or the iteration budget runs out before
/// the mean absolute change in `W` falls under `tol` times the mean absolute
/// off-diagonal of `S`.
pub fn graphical_lasso(s: &DMatrix<f64>, rho: f64, max_iter: usize, tol: f64) -> Option<DMatrix<f64>> {
    let d = s.nrows();
    if d == 1 {
        let w = s[(0, 0)] + rho;
        return (w > 0.0).then(|| DMatrix::from_element(1, 1, 1.0 / w));
    }
    let mut w = s.clone();
    for i in 0..d {
        w[(i, i)] += rho;
    }
    let mut beta = DMatrix::<f64>::zeros(d - 1, d);
    let off_scale = {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    acc += s[(i, j)].abs();
                }
            }
        }
        (acc / (d * (d - 1)) as f64).max(1e-12)
    };

    let idx = |j: usize| -> Vec<usize> { (0..d).filter(|&k| k != j).collect() };
    let mut converged = false;
    for _ in 0..max_iter {
        let w_old = w.clone();
        for j in 0..d {
            let others = idx(j);
            let w11 = w.select_rows(&others).select_columns(&others);
            let s12 = DVector::from_iterator(d - 1, others.iter().map(|&k| s[(k, j)]));
            let mut b = beta.column(j).into_owned();
            // lasso: min ½ bᵀ W11 b − bᵀ s12 + ρ‖b‖₁
            for _ in 0..100 {
                let mut delta = 0.0_f64;
                for k in 0..d - 1 {
                    let r = s12[k] - w11.row(k).dot(&b.transpose()) + w11[(k, k)] * b[k];
                    let nb = soft(r, rho) / w11[(k, k)];
                    delta = delta.max((nb - b[k]).abs());
                    b[k] = nb;
                }
                if delta < 1e-10 {
                    break;
                }
            }
            let w12 = &w11 * &b;
            for (c, &k) in others.iter().enumerate() {
                w[(k, j)] = w12[c];
                w[(j, k)] = w12[c];
            }
            beta.set_column(j, &b);
        }
        let change = (&w - &w_old).abs().sum() / (d * d) as f64;
        if change < tol * off_scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let mut theta = DMatrix::zeros(d, d);
    for j in 0..d {
        let others = idx(j);
        let b = beta.column(j);
        let w12 = DVector::from_iterator(d - 1, others.iter().map(|&k| w[(k, j)]));
        let t22 = 1.0 / (w[(j, j)] - w12.dot(&b));
        theta[(j, j)] = t22;
        for (c, &k) in others.iter().enumerate() {
            theta[(k, j)] = -b[c] * t22;
        }
    }
    symmetrize(&mut theta);
    cholesky_jittered(&theta).filter(|(_, jit)| *jit == 0.0).map(|_| theta)
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// `(S + ρI)⁻¹`.
pub fn ridge_inverse(s: &DMatrix<f64>, rho: f64) -> Option<DMatrix<f64>> {
    let mut m = s.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += rho;
    }
    let mut inv = m.cholesky()?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_penalty_inverts() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.3, 0.1, 0.3, 1.0]);
        let theta = graphical_lasso(&s, 0.0, 200, 1e-10).unwrap();
        assert!((theta * &s - DMatrix::identity(3, 3)).norm() < 1e-6);
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let theta = graphical_lasso(&s, 0.5, 100, 1e-8).unwrap();
        assert_eq!(theta[(0, 1)], 0.0);
        assert!((theta[(0, 0)] - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn kkt_conditions_hold() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.3, 0.6, 1.0, 0.5, 0.3, 0.5, 1.0]);
        let rho = 0.1;
        let theta = graphical_lasso(&s, rho, 500, 1e-10).unwrap();
        let w = theta.clone().try_inverse().unwrap();
        for i in 0..3 {
            assert!((w[(i, i)] - s[(i, i)] - rho).abs() < 1e-6);
            for j in 0..3 {
                if i != j {
                    let g = w[(i, j)] - s[(i, j)];
                    if theta[(i, j)] != 0.0 {
                        assert!((g.abs() - rho).abs() < 1e-5, "{g}");
                    } else {
                        assert!(g.abs() <= rho + 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn ridge_inverse_of_zero() {
        let inv = ridge_inverse(&DMatrix::zeros(2, 2), 0.5).unwrap();
        assert!((inv - DMatrix::identity(2, 2) * 2.0).norm() < 1e-14);
    }
}
