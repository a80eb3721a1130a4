use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::hard_threshold;

/// Free parameters of one causal VAR(p) model.
///
/// The stationary precision is `Ω = (I − E) diag(f) (I − E)ᵀ` with
/// `E = H_λ(e1)`; each lag `j` adds the conditional-precision increment
/// `C_j⁻¹ − C_{j−1}⁻¹ = L_j L_jᵀ`, and `K_j` completes the rotation of the
/// cross-covariance factor. Every value of these parameters (with `f > 0`
/// and full-rank `K_j`) describes a causal process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedRankVarParams {
    /// Strictly lower-triangular latent Cholesky factor.
    pub e1: DMatrix<f64>,
    /// Positive diagonal of the modified Cholesky decomposition.
    pub f: DVector<f64>,
    /// Hard threshold applied to `e1`.
    pub lambda: f64,
    /// Precision-update factors, one `d × r_j` matrix per lag.
    pub l: Vec<DMatrix<f64>>,
    /// Rotation-completion factors, shaped like `l`.
    pub k: Vec<DMatrix<f64>>,
}

impl ReducedRankVarParams {
    pub fn new(
        e1: DMatrix<f64>,
        f: DVector<f64>,
        lambda: f64,
        l: Vec<DMatrix<f64>>,
        k: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let p = Self { e1, f, lambda, l, k };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn order(&self) -> usize {
        self.l.len()
    }

    /// Per-lag update ranks.
    pub fn ranks(&self) -> Vec<usize> {
        self.l.iter().map(|m| m.ncols()).collect()
    }

    /// Shared rank when all lags agree.
    pub fn shared_rank(&self) -> Option<usize> {
        let r = self.ranks();
        match r.first() {
            Some(&r0) if r.iter().all(|&x| x == r0) => Some(r0),
            _ => None,
        }
    }

    /// Checks shapes, positivity and triangularity.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Contract("dimension must be positive".into()));
        }
        if self.e1.shape() != (d, d) {
            return Err(Error::Dimension(format!("e1 is {:?}, expected ({d}, {d})", self.e1.shape())));
        }
        check_strictly_lower(&self.e1)?;
        check_positive(&self.f)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("threshold must be >= 0, got {}", self.lambda)));
        }
        if self.l.len() != self.k.len() {
            return Err(Error::Dimension(format!("{} L factors but {} K factors", self.l.len(), self.k.len())));
        }
        for (j, (l, k)) in self.l.iter().zip(&self.k).enumerate() {
            if l.nrows() != d || k.nrows() != d || l.ncols() != k.ncols() {
                return Err(Error::Dimension(format!("lag {}: L is {:?}, K is {:?}", j + 1, l.shape(), k.shape())));
            }
            if l.ncols() > d {
                return Err(Error::Dimension(format!("lag {}: rank exceeds dimension", j + 1)));
            }
        }
        let finite = self.e1.iter().chain(self.f.iter()).all(|v| v.is_finite())
            && self.l.iter().chain(&self.k).all(|m| m.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Domain("non-finite parameter entry".into()));
        }
        Ok(())
    }

    /// Stationary precision `Ω`.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        build_precision(&self.e1, &self.f, self.lambda)
    }

    /// Thresholded factor `E = H_λ(e1)`.
    pub fn thresholded_e(&self) -> DMatrix<f64> {
        hard_threshold(&self.e1, self.lambda)
    }

    /// Parameters whose precision equals `omega` exactly (λ = 0).
    pub fn from_precision(omega: &DMatrix<f64>, l: Vec<DMatrix<f64>>, k: Vec<DMatrix<f64>>) -> Result<Self> {
        let (e, f) = modified_cholesky(omega)?;
        Self::new(e, f, 0.0, l, k)
    }

    /// Random parameters with all free entries drawn from `N(0, 1)` (f = exp of a normal).
    pub fn random<R: Rng + ?Sized>(d: usize, p: usize, r: usize, rng: &mut R) -> Self {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        let mut e1 = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..i {
                e1[(i, j)] = normal();
            }
        }
        let f = DVector::from_fn(d, |_, _| (0.5 * normal()).exp());
        let l = (0..p).map(|_| DMatrix::from_fn(d, r, |_, _| normal())).collect();
        let k = (0..p).map(|_| DMatrix::from_fn(d, r, |_, _| normal())).collect();
        Self { e1, f, lambda: 0.0, l, k }
    }
}

fn check_strictly_lower(e1: &DMatrix<f64>) -> Result<()> {
    for i in 0..e1.nrows() {
        for j in i..e1.ncols() {
            if e1[(i, j)] != 0.0 {
                return Err(Error::Contract(format!(
                    "e1 must be strictly lower triangular; entry ({i}, {j}) = {}",
                    e1[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

fn check_positive(f: &DVector<f64>) -> Result<()> {
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Domain(format!("f[{i}] = {v} is not positive")));
    }
    Ok(())
}

/// `Ω = (I − E) diag(f) (I − E)ᵀ` with `E = H_λ(e1)`.
pub fn build_precision(e1: &DMatrix<f64>, f: &DVector<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    check_positive(f)?;
    if e1.shape() != (f.len(), f.len()) {
        return Err(Error::Dimension(format!("e1 {:?} vs f of length {}", e1.shape(), f.len())));
    }
    check_strictly_lower(e1)?;
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("threshold must be >= 0, got {lambda}")));
    }
    let d = f.len();
    let unit = DMatrix::identity(d, d) - hard_threshold(e1, lambda);
    let scaled = &unit * DMatrix::from_diagonal(f);
    let mut omega = scaled * unit.transpose();
    crate::linalg::symmetrize(&mut omega);
    Ok(omega)
}

/// `Ω⁻¹` from the modified Cholesky factors, using only triangular solves.
pub fn stationary_covariance_from_factors(e: &DMatrix<f64>, f: &DVector<f64>) -> DMatrix<f64> {
    let d = f.len();
    let unit = DMatrix::identity(d, d) - e;
    // N = (I − E)⁻¹ is unit lower triangular.
    let n = unit.solve_lower_triangular(&DMatrix::identity(d, d)).expect("unit triangular matrix is invertible");
    let scaled_t = DMatrix::from_diagonal(&f.map(|v| 1.0 / v)) * &n;
    let mut cov = n.transpose() * scaled_t;
    crate::linalg::symmetrize(&mut cov);
    cov
}

/// Modified Cholesky `Ω = (I − E) F (I − E)ᵀ` of an SPD matrix.
pub fn modified_cholesky(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = omega.nrows();
    let ch = nalgebra::Cholesky::new(crate::linalg::symmetrized(omega.clone()))
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let g = ch.l();
    let diag = g.diagonal();
    let f = diag.map(|v| v * v);
    let mut e = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in (j + 1)..d {
            e[(i, j)] = -g[(i, j)] / diag[j];
        }
    }
    Ok((e, f))
}
