//! Forward map from free parameters to autocovariances and VAR form.
//!
//! The recursion runs a multivariate Durbin-Levinson (Whittle) scheme keyed on
//! the low-rank factors. With `Γ(h) = E[X_t X_{t−h}ᵀ]`, forward coefficients
//! `Φ_{j,k}` predict `X_t` from `X_{t−1..t−j}` with error covariance `C_j`, and
//! backward coefficients `Ψ_{j,m}` predict `X_{t−j}` from `X_{t−j+m}` with
//! error covariance `D_j`. The partial cross-covariance at step `j` is the
//! rank-`r_j` matrix `W_j = U_j V_jᵀ`, where
//!
//! ```text
//! U_j = C_{j−1} L_j (I + L_jᵀ C_{j−1} L_j)^{−1/2}
//! V_j = K_j (K_jᵀ D_{j−1}⁻¹ K_j)^{−1/2}
//! ```
//!
//! and the order updates are
//!
//! ```text
//! C_j⁻¹ = C_{j−1}⁻¹ + L_j L_jᵀ          C_j = C_{j−1} − U_j U_jᵀ
//! D_j   = D_{j−1} − V_j M_j V_jᵀ         D_j⁻¹ = D_{j−1}⁻¹ + D_{j−1}⁻¹V_j S_j V_jᵀD_{j−1}⁻¹
//! Φ_{j,j} = W_j D_{j−1}⁻¹               Φ_{j,k} = Φ_{j−1,k} − Φ_{j,j} Ψ_{j−1,j−k}
//! Ψ_{j,j} = W_jᵀ C_{j−1}⁻¹              Ψ_{j,m} = Ψ_{j−1,m} − Ψ_{j,j} Φ_{j−1,j−m}
//! Γ(j) = W_j + Σ_{k<j} Φ_{j−1,k} Γ(j−k)
//! ```
//!
//! with `S_j = L_jᵀ C_{j−1} L_j` and `M_j = U_jᵀ C_{j−1}⁻¹ U_j = S_j (I + S_j)⁻¹`.
//! No `d × d` inverse is formed beyond the triangular solve for `Ω⁻¹`.

use nalgebra::DMatrix;

use super::params::{stationary_covariance_from_factors, ReducedRankVarParams};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, sym_inv_sqrt, symmetrize};

/// Per-lag quantities derived from a parameter set.
#[derive(Debug, Clone)]
pub struct DerivedState {
    /// Conditional covariances `C_0..C_p`.
    pub c: Vec<DMatrix<f64>>,
    pub c_inv: Vec<DMatrix<f64>>,
    /// Backward Schur complements `D_0..D_p`.
    pub d: Vec<DMatrix<f64>>,
    pub d_inv: Vec<DMatrix<f64>>,
    pub u: Vec<DMatrix<f64>>,
    pub v: Vec<DMatrix<f64>>,
    /// Autocovariances `Γ(0)..Γ(p)`; empty when skipped by the fast path.
    pub gamma: Vec<DMatrix<f64>>,
    /// `phi[m][k-1] = Φ_{m,k}` for every order `m = 0..=p`.
    pub phi: Vec<Vec<DMatrix<f64>>>,
    /// `psi[m][k-1] = Ψ_{m,k}`.
    pub psi: Vec<Vec<DMatrix<f64>>>,
    /// `log det C_j⁻¹`, accumulated through the determinant lemma.
    pub logdet_c_inv: Vec<f64>,
}

impl DerivedState {
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.c[0].nrows()
    }

    /// Block Toeplitz covariance of `(X_t, X_{t−1}, …, X_{t−j})`, `j ≤ p`.
    pub fn upsilon(&self, j: usize) -> DMatrix<f64> {
        assert!(j < self.gamma.len(), "Γ available only up to lag {}", self.gamma.len() - 1);
        block_toeplitz(&self.gamma, j + 1)
    }
}

/// Classical VAR form of a parameter set.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub a: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

impl VarModel {
    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }
}

/// Orthogonal polar factor of a square nonsingular matrix by scaled Newton iteration.
fn polar_factor(r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut x = r.clone();
    for _ in 0..100 {
        let inv_t = x.clone().try_inverse()?.transpose();
        let zeta = (inv_t.norm() / x.norm()).sqrt();
        let next = (&x * zeta + inv_t / zeta) * 0.5;
        let delta = (&next - &x).norm();
        x = next;
        if delta <= 1e-15 * x.norm() {
            break;
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `V = K (Kᵀ D⁻¹ K)^{−1/2}`, computed as `L · polar(L⁻¹ K)` with `D = L Lᵀ` so
/// that `Vᵀ D⁻¹ V = I` holds to rounding even when `K` is nearly rank deficient.
fn normalized_rotation(k: &DMatrix<f64>, d: &DMatrix<f64>, d_inv: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let fallback = || {
        let mut kk = k.transpose() * d_inv * k;
        symmetrize(&mut kk);
        sym_inv_sqrt(&kk).map(|root| k * root)
    };
    let Some(chol) = d.clone().cholesky() else { return fallback() };
    let l = chol.l();
    let g = l.solve_lower_triangular(k)?;
    let qr = g.qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    if diag.min() <= 1e-7 * diag.max() {
        return None;
    }
    let q = qr.q();
    Some(l * (q * polar_factor(&r)?))
}

/// Dense block Toeplitz matrix with `blocks` block rows, block `(a, b)` equal
/// to `Γ(b − a)` above the diagonal and `Γ(a − b)ᵀ` below.
pub fn block_toeplitz(gamma: &[DMatrix<f64>], blocks: usize) -> DMatrix<f64> {
    let d = gamma[0].nrows();
    let mut out = DMatrix::zeros(blocks * d, blocks * d);
    for a in 0..blocks {
        for b in 0..blocks {
            let blk = if b >= a { gamma[b - a].clone() } else { gamma[a - b].transpose() };
            out.view_mut((a * d, b * d), (d, d)).copy_from(&blk);
        }
    }
    out
}

pub(crate) struct ForwardOptions {
    pub gamma: bool,
    pub check_spd: bool,
}

pub(crate) fn forward_core(params: &ReducedRankVarParams, opts: ForwardOptions) -> Result<DerivedState> {
    params.validate()?;
    let d = params.dim();
    let p = params.order();
    let e = params.thresholded_e();
    let omega = super::params::build_precision(&params.e1, &params.f, params.lambda)?;
    let c0 = stationary_covariance_from_factors(&e, &params.f);
    let logdet0: f64 = params.f.iter().map(|v| v.ln()).sum();

    let mut st = DerivedState {
        c: Vec::with_capacity(p + 1),
        c_inv: Vec::with_capacity(p + 1),
        d: Vec::with_capacity(p + 1),
        d_inv: Vec::with_capacity(p + 1),
        u: Vec::with_capacity(p),
        v: Vec::with_capacity(p),
        gamma: Vec::new(),
        phi: vec![Vec::new()],
        psi: vec![Vec::new()],
        logdet_c_inv: vec![logdet0],
    };
    st.c.push(c0.clone());
    st.c_inv.push(omega.clone());
    st.d.push(c0.clone());
    st.d_inv.push(omega);
    if opts.gamma {
        st.gamma.push(c0);
    }

    for j in 1..=p {
        let l = &params.l[j - 1];
        let k = &params.k[j - 1];
        let r = l.ncols();
        let c_prev = &st.c[j - 1];
        let c_inv_prev = &st.c_inv[j - 1];
        let d_prev = &st.d[j - 1];
        let d_inv_prev = &st.d_inv[j - 1];

        if r == 0 {
            // Pruned lag: no partial correlation, all Schur complements carry over.
            let mut phi = st.phi[j - 1].clone();
            phi.push(DMatrix::zeros(d, d));
            let mut psi = st.psi[j - 1].clone();
            psi.push(DMatrix::zeros(d, d));
            if opts.gamma {
                let mut g = DMatrix::zeros(d, d);
                for kk_ in 1..j {
                    g += &st.phi[j - 1][kk_ - 1] * &st.gamma[j - kk_];
                }
                st.gamma.push(g);
            }
            st.logdet_c_inv.push(st.logdet_c_inv[j - 1]);
            st.c.push(c_prev.clone());
            st.c_inv.push(c_inv_prev.clone());
            st.d.push(d_prev.clone());
            st.d_inv.push(d_inv_prev.clone());
            st.u.push(DMatrix::zeros(d, 0));
            st.v.push(DMatrix::zeros(d, 0));
            st.phi.push(phi);
            st.psi.push(psi);
            continue;
        }

        let cl = c_prev * l;
        let mut s = l.transpose() * &cl;
        symmetrize(&mut s);
        let i_plus_s = DMatrix::identity(r, r) + &s;
        let root = sym_inv_sqrt(&i_plus_s)
            .ok_or_else(|| Error::Conditioning { lag: j, detail: "I + LᵀCL is not positive definite".into() })?;
        let u = &cl * &root;

        let v = normalized_rotation(k, d_prev, d_inv_prev).ok_or(Error::Singular { lag: j })?;

        let logdet_step = crate::linalg::logdet_spd(&i_plus_s)
            .map_err(|_| Error::Conditioning { lag: j, detail: "determinant update failed".into() })?;

        let mut c_inv = c_inv_prev + l * l.transpose();
        symmetrize(&mut c_inv);
        let mut c = c_prev - &u * u.transpose();
        symmetrize(&mut c);

        let cinv_u = c_inv_prev * &u;
        let mut m = u.transpose() * &cinv_u;
        symmetrize(&mut m);
        let dinv_v = d_inv_prev * &v;
        let mut d_new = d_prev - &v * &m * v.transpose();
        symmetrize(&mut d_new);
        let mut d_inv = d_inv_prev + &dinv_v * &s * dinv_v.transpose();
        symmetrize(&mut d_inv);

        // Φ_{j,j} = U (D⁻¹V)ᵀ and Ψ_{j,j} = V (C⁻¹U)ᵀ, both rank r.
        let fwd_lead = &u * dinv_v.transpose();
        let bwd_lead = &v * cinv_u.transpose();
        let phi_prev = &st.phi[j - 1];
        let psi_prev = &st.psi[j - 1];
        let mut phi = Vec::with_capacity(j);
        let mut psi = Vec::with_capacity(j);
        for kk_ in 1..j {
            // low-rank products: U ((D⁻¹V)ᵀ Ψ)
            let upd = &u * (dinv_v.transpose() * &psi_prev[j - kk_ - 1]);
            phi.push(&phi_prev[kk_ - 1] - upd);
        }
        phi.push(fwd_lead.clone());
        for m_ in 1..j {
            let upd = &v * (cinv_u.transpose() * &phi_prev[j - m_ - 1]);
            psi.push(&psi_prev[m_ - 1] - upd);
        }
        psi.push(bwd_lead);

        if opts.gamma {
            let mut g = &u * v.transpose();
            for kk_ in 1..j {
                g += &phi_prev[kk_ - 1] * &st.gamma[j - kk_];
            }
            st.gamma.push(g);
        }

        if opts.check_spd && cholesky_jittered(&d_new).is_none() {
            return Err(Error::Conditioning { lag: j, detail: "backward Schur complement lost definiteness".into() });
        }
        let finite = c.iter().chain(d_new.iter()).chain(d_inv.iter()).all(|x| x.is_finite());
        if !finite || !logdet_step.is_finite() {
            return Err(Error::Conditioning { lag: j, detail: "non-finite intermediate".into() });
        }

        st.logdet_c_inv.push(st.logdet_c_inv[j - 1] + logdet_step);
        st.c.push(c);
        st.c_inv.push(c_inv);
        st.d.push(d_new);
        st.d_inv.push(d_inv);
        st.u.push(u);
        st.v.push(v);
        st.phi.push(phi);
        st.psi.push(psi);
    }
    if opts.check_spd && cholesky_jittered(&st.c[p]).is_none() {
        return Err(Error::Conditioning { lag: p, detail: "innovation covariance lost definiteness".into() });
    }
    Ok(st)
}

/// Derived state and classical VAR form of a parameter set.
///
/// The returned model is causal for every valid input.
pub fn forward_map(params: &ReducedRankVarParams) -> Result<(DerivedState, VarModel)> {
    let st = forward_core(params, ForwardOptions { gamma: true, check_spd: true })?;
    let model = var_model(&st);
    Ok((st, model))
}

pub(crate) fn var_model(st: &DerivedState) -> VarModel {
    let p = st.order();
    VarModel { a: st.phi[p].clone(), sigma: st.c[p].clone(), gamma0: st.c[0].clone(), omega: st.c_inv[0].clone() }
}
