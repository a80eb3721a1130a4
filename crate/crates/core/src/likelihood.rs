//! Exact Gaussian log-likelihood of a sample under a reduced-rank causal VAR.
//!
//! The likelihood factors as `f(X_1) Π_t f(X_t | X_{t−1}, …)`. For `t ≤ p` the
//! conditioning set grows and the order-`(t−1)` predictor is used; afterwards
//! the order-`p` predictor `(A_1..A_p, C_p)` applies at every step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::varcore::{
    block_toeplitz, forward_core, forward_map, stationary_covariance_from_factors, ForwardOptions, ReducedRankVarParams,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Largest `T·d` accepted by the dense oracle.
pub const DENSE_ORACLE_LIMIT: usize = 2000;

/// A mean-zero sample `X_1..X_T`, one time point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: DMatrix<f64>,
}

impl Sample {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Input("sample must have at least one row and one column".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("sample contains non-finite entries".into()));
        }
        Ok(Self { x })
    }

    /// Builds a sample after subtracting each column's mean.
    pub fn centered(x: DMatrix<f64>) -> Result<Self> {
        let mut x = x;
        for j in 0..x.ncols() {
            let m = x.column(j).mean();
            x.column_mut(j).add_scalar_mut(-m);
        }
        Self::new(x)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.x.row(t).transpose()
    }

    /// The first `t` rows.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        Self::new(self.x.rows(0, t.min(self.len())).into_owned())
    }
}

fn check_dims(params: &ReducedRankVarParams, sample: &Sample) -> Result<()> {
    if params.dim() != sample.dim() {
        return Err(Error::Dimension(format!("model dimension {} vs sample dimension {}", params.dim(), sample.dim())));
    }
    Ok(())
}

/// Sums the conditional Gaussian log-densities given per-order predictors.
///
/// Rows before `p` use the growing-order predictors one at a time; the
/// stationary segment is handled with whole-matrix products.
fn accumulate(sample: &Sample, phi: &[Vec<DMatrix<f64>>], c_inv: &[DMatrix<f64>], logdet_c_inv: &[f64]) -> Result<f64> {
    let p = c_inv.len() - 1;
    let d = sample.dim();
    let n = sample.len();
    let x = &sample.x;
    let mut total = 0.0;
    let head = p.min(n);
    for t in 0..head {
        let mut resid = x.row(t).transpose();
        for k in 1..=t {
            resid.gemv(-1.0, &phi[t][k - 1], &x.row(t - k).transpose(), 1.0);
        }
        let quad = (&c_inv[t] * &resid).dot(&resid);
        let term = -0.5 * (d as f64 * LN_2PI - logdet_c_inv[t] + quad);
        if !term.is_finite() {
            return Err(Error::Conditioning { lag: t, detail: format!("non-finite density at t = {}", t + 1) });
        }
        total += term;
    }
    if n > p {
        let m = n - p;
        let mut resid = x.rows(p, m).into_owned();
        for k in 1..=p {
            resid.gemm(-1.0, &x.rows(p - k, m), &phi[p][k - 1].transpose(), 1.0);
        }
        let weighted = &resid * &c_inv[p];
        let quad = resid.component_mul(&weighted).sum();
        let term = -0.5 * (m as f64 * (d as f64 * LN_2PI - logdet_c_inv[p]) + quad);
        if !term.is_finite() {
            return Err(Error::Conditioning { lag: p, detail: "non-finite density in the stationary segment".into() });
        }
        total += term;
    }
    Ok(total)
}

/// Log-likelihood through the general low-rank recursion.
pub fn loglik_recursive(params: &ReducedRankVarParams, sample: &Sample) -> Result<f64> {
    check_dims(params, sample)?;
    let st = forward_core(params, ForwardOptions { gamma: false, check_spd: true })?;
    accumulate(sample, &st.phi, &st.c_inv, &st.logdet_c_inv)
}

/// Log-likelihood for rank-one updates using only scalar divisions and
/// outer-product updates after the initial `Ω⁻¹` solve.
pub fn loglik_rank_one(params: &ReducedRankVarParams, sample: &Sample) -> Result<f64> {
    check_dims(params, sample)?;
    params.validate()?;
    if params.ranks().iter().any(|&r| r != 1) {
        return Err(Error::Contract(format!("rank-one path requires r = 1 at every lag, got {:?}", params.ranks())));
    }
    let d = params.dim();
    let p = params.order();
    let e = params.thresholded_e();
    let omega = params.precision()?;
    let mut c = stationary_covariance_from_factors(&e, &params.f);
    let mut d_inv = omega.clone();
    let mut c_inv = Vec::with_capacity(p + 1);
    let mut logdet = Vec::with_capacity(p + 1);
    c_inv.push(omega);
    logdet.push(params.f.iter().map(|v| v.ln()).sum::<f64>());
    let mut phi: Vec<Vec<DMatrix<f64>>> = vec![Vec::new()];
    let mut psi: Vec<Vec<DMatrix<f64>>> = vec![Vec::new()];

    let mut cl = DVector::zeros(d);
    let mut dinv_k = DVector::zeros(d);
    let mut row = DVector::zeros(d);
    for j in 1..=p {
        let l = params.l[j - 1].column(0);
        let k = params.k[j - 1].column(0);
        cl.gemv(1.0, &c, &l, 0.0);
        let lj = l.dot(&cl);
        dinv_k.gemv(1.0, &d_inv, &k, 0.0);
        let kj = k.dot(&dinv_k);
        if !(kj > 0.0) || !kj.is_finite() {
            return Err(Error::Singular { lag: j });
        }
        if !(lj >= 0.0) || !lj.is_finite() {
            return Err(Error::Conditioning { lag: j, detail: format!("LᵀCL = {lj}") });
        }
        let a = 1.0 / (1.0 + lj).sqrt();
        let b = 1.0 / kj.sqrt();
        let u = &cl * a;
        let v = k * b;
        // C_{j−1}⁻¹ U = L (1 + l)^{−1/2}
        let cinv_u = l * a;
        let dinv_v = &dinv_k * b;

        let mut phi_j = Vec::with_capacity(j);
        for kk in 1..j {
            let mut m = phi[j - 1][kk - 1].clone();
            row.gemv_tr(1.0, &psi[j - 1][j - kk - 1], &dinv_v, 0.0);
            m.ger(-1.0, &u, &row, 1.0);
            phi_j.push(m);
        }
        phi_j.push(&u * dinv_v.transpose());
        let mut psi_j = Vec::with_capacity(j);
        for mm in 1..j {
            let mut m = psi[j - 1][mm - 1].clone();
            row.gemv_tr(1.0, &phi[j - 1][j - mm - 1], &cinv_u, 0.0);
            m.ger(-1.0, &v, &row, 1.0);
            psi_j.push(m);
        }
        psi_j.push(&v * cinv_u.transpose());

        c.ger(-1.0, &u, &u, 1.0);
        let mut ci = c_inv[j - 1].clone();
        ci.ger(1.0, &l, &l, 1.0);
        d_inv.ger(lj, &dinv_v, &dinv_v, 1.0);
        logdet.push(logdet[j - 1] + lj.ln_1p());
        c_inv.push(ci);
        phi.push(phi_j);
        psi.push(psi_j);
    }
    accumulate(sample, &phi, &c_inv, &logdet)
}

/// Autocovariances `Γ(0..n)` extended past lag `p` by the Yule-Walker recursion.
pub fn autocovariances(params: &ReducedRankVarParams, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let (st, model) = forward_map(params)?;
    let p = params.order();
    let mut gamma = st.gamma;
    gamma.truncate(n + 1);
    while gamma.len() <= n {
        let h = gamma.len();
        let mut g = DMatrix::zeros(params.dim(), params.dim());
        for k in 1..=p {
            let lagged = if h >= k { gamma[h - k].clone() } else { gamma[k - h].transpose() };
            g += &model.a[k - 1] * lagged;
        }
        gamma.push(g);
    }
    Ok(gamma)
}

/// Dense Gaussian log-density of the stacked sample under its full `Td × Td`
/// block Toeplitz covariance. Intended as a test oracle.
pub fn loglik_dense_oracle(params: &ReducedRankVarParams, sample: &Sample) -> Result<f64> {
    check_dims(params, sample)?;
    let t = sample.len();
    let d = sample.dim();
    if t * d > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeGuard { size: t * d, limit: DENSE_ORACLE_LIMIT });
    }
    let gamma = autocovariances(params, t.saturating_sub(1))?;
    // Stack as (X_1, …, X_T): Cov(X_a, X_b) = Γ(a − b) for a ≥ b, i.e. the
    // transpose convention of `block_toeplitz`, so build it on the reversed order.
    let ups = block_toeplitz(&gamma, t);
    let mut y = DVector::zeros(t * d);
    for s in 0..t {
        // block s of the Toeplitz matrix is X_{T−s}
        y.rows_mut(s * d, d).copy_from(&sample.row(t - 1 - s));
    }
    let ch = nalgebra::Cholesky::new(ups)
        .ok_or_else(|| Error::Conditioning { lag: 0, detail: "dense covariance is not positive definite".into() })?;
    let logdet = 2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let sol = ch.solve(&y);
    Ok(-0.5 * ((t * d) as f64 * LN_2PI + logdet + y.dot(&sol)))
}

/// Reference implementation that solves a dense block system at every time
/// step. Used as the performance baseline for the recursive paths.
pub fn loglik_dense_per_step(params: &ReducedRankVarParams, sample: &Sample) -> Result<f64> {
    check_dims(params, sample)?;
    let (st, _) = forward_map(params)?;
    let gamma = &st.gamma;
    let p = params.order();
    let d = sample.dim();
    let mut total = 0.0;
    for t in 0..sample.len() {
        let m = t.min(p);
        let x = sample.row(t);
        let (mean, cov) = if m == 0 {
            (DVector::zeros(d), gamma[0].clone())
        } else {
            let ups = block_toeplitz(gamma, m);
            let mut cross = DMatrix::zeros(d, m * d);
            let mut y = DVector::zeros(m * d);
            for h in 1..=m {
                cross.view_mut((0, (h - 1) * d), (d, d)).copy_from(&gamma[h]);
                y.rows_mut((h - 1) * d, d).copy_from(&sample.row(t - h));
            }
            let ch = nalgebra::Cholesky::new(ups)
                .ok_or_else(|| Error::Conditioning { lag: m, detail: "dense block is not positive definite".into() })?;
            let coef_t = ch.solve(&cross.transpose());
            (coef_t.transpose() * y, &gamma[0] - &cross * coef_t)
        };
        let ch = nalgebra::Cholesky::new(crate::linalg::symmetrized(cov)).ok_or_else(|| Error::Conditioning {
            lag: m,
            detail: "conditional covariance is not positive definite".into(),
        })?;
        let resid = x - mean;
        let logdet = 2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        total += -0.5 * (d as f64 * LN_2PI + logdet + resid.dot(&ch.solve(&resid)));
    }
    Ok(total)
}
