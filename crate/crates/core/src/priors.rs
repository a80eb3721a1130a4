//! Prior densities and conjugate hyperparameter updates.
//!
//! The precision factors use `e1_ij ~ N(0, σ²_e)`, `σ²_e ~ Inv-Ga(c1, c1)`,
//! `f_i ~ IG` with kernel `t^{−3/2} exp(−(t − ξ)²/(2t))`, `ξ` half-normal and
//! `λ ~ U(0, λ_max]`. The update factors are stacked column-wise as
//! `Λ = [L_1, …, L_p]`; global column `k` (lag `j`, within-lag column `c`) has
//! entry precision `φ_{ℓk} τ_k ψ_{j,c}` with multiplicative gamma processes
//! `τ_k = Π_{i≤k} δ_i` across all columns and `ψ_{j,c} = Π_{i≤c} δ^{(j)}_i`
//! within each lag. With rank-one updates the inner layer is dropped (`ψ ≡ 1`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::varcore::ReducedRankVarParams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Entrywise hard threshold `h · 1{|h| > λ}`.
pub fn hard_threshold(m: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    m.map(|h| if h.abs() > lambda { h } else { 0.0 })
}

/// Fixed hyperconstants of the prior hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperConfig {
    pub nu1: f64,
    pub c1: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Scale of the half-normal prior on the inverse-Gaussian location.
    pub xi_prior_sd: f64,
    /// Upper end of the uniform prior on the threshold.
    pub lambda_max: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self { nu1: 3.0, c1: 1.0, kappa1: 2.1, kappa2: 3.1, xi_prior_sd: 10.0, lambda_max: 1.0 }
    }
}

impl HyperConfig {
    fn kappa(&self, i: usize) -> f64 {
        if i == 0 {
            self.kappa1
        } else {
            self.kappa2
        }
    }
}

/// Current values of the shrinkage hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub sigma2_e: f64,
    pub xi: f64,
    /// Local precisions, `d × (total columns)`.
    pub phi: DMatrix<f64>,
    /// Global column multipliers `δ_k`.
    pub delta: DVector<f64>,
    /// Within-lag multipliers `δ^{(j)}_c`.
    pub delta_lag: Vec<DVector<f64>>,
    pub tau: DVector<f64>,
    pub psi: Vec<DVector<f64>>,
    /// Whether the within-lag layer is active.
    pub lag_layer: bool,
}

/// `(lag, column)` for each global column of `Λ`.
pub fn column_layout(ranks: &[usize]) -> Vec<(usize, usize)> {
    ranks.iter().enumerate().flat_map(|(j, &r)| (0..r).map(move |c| (j, c))).collect()
}

impl HyperState {
    /// All multipliers at one; the inner layer is active only if some rank exceeds one.
    pub fn initial(d: usize, ranks: &[usize]) -> Self {
        let n = ranks.iter().sum();
        let mut h = Self {
            sigma2_e: 1.0,
            xi: 1.0,
            phi: DMatrix::from_element(d, n, 1.0),
            delta: DVector::from_element(n, 1.0),
            delta_lag: ranks.iter().map(|&r| DVector::from_element(r, 1.0)).collect(),
            tau: DVector::zeros(n),
            psi: Vec::new(),
            lag_layer: ranks.iter().any(|&r| r > 1),
        };
        h.recompute();
        h
    }

    /// Independent draw from the hyperprior (with `σ²_e`, `ξ` included).
    pub fn sample_prior<R: Rng + ?Sized>(d: usize, ranks: &[usize], cfg: &HyperConfig, rng: &mut R) -> Self {
        let mut h = Self::initial(d, ranks);
        let local = Gamma::new(cfg.nu1, 1.0 / cfg.nu1).expect("valid gamma");
        h.phi = DMatrix::from_fn(d, h.phi.ncols(), |_, _| local.sample(rng));
        for i in 0..h.delta.len() {
            h.delta[i] = Gamma::new(cfg.kappa(i), 1.0).expect("valid gamma").sample(rng);
        }
        if h.lag_layer {
            for dl in h.delta_lag.iter_mut() {
                for i in 0..dl.len() {
                    dl[i] = Gamma::new(cfg.kappa(i), 1.0).expect("valid gamma").sample(rng);
                }
            }
        }
        h.sigma2_e = 1.0 / Gamma::new(cfg.c1, 1.0 / cfg.c1).expect("valid gamma").sample(rng);
        let half = Normal::new(0.0, cfg.xi_prior_sd).expect("valid normal");
        h.xi = loop {
            let x: f64 = half.sample(rng);
            if x != 0.0 {
                break x.abs();
            }
        };
        h.recompute();
        h
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.delta_lag.iter().map(|v| v.len()).collect()
    }

    /// Refreshes the cumulative products `τ` and `ψ`.
    pub fn recompute(&mut self) {
        let mut acc = 1.0;
        self.tau = self.delta.map(|v| {
            acc *= v;
            acc
        });
        self.psi = self
            .delta_lag
            .iter()
            .map(|dl| {
                if self.lag_layer {
                    let mut acc = 1.0;
                    dl.map(|v| {
                        acc *= v;
                        acc
                    })
                } else {
                    DVector::from_element(dl.len(), 1.0)
                }
            })
            .collect();
    }

    /// Column-level precision multiplier `τ_k ψ_{j,c}`.
    pub fn column_scale(&self, layout: &[(usize, usize)], k: usize) -> f64 {
        let (j, c) = layout[k];
        self.tau[k] * self.psi[j][c]
    }

    /// Keeps only the global columns flagged in `keep`, in order.
    pub fn retain_columns(&self, keep: &[bool]) -> Self {
        let layout = column_layout(&self.ranks());
        assert_eq!(keep.len(), layout.len());
        let kept: Vec<usize> = (0..keep.len()).filter(|&k| keep[k]).collect();
        let phi = DMatrix::from_fn(self.phi.nrows(), kept.len(), |i, c| self.phi[(i, kept[c])]);
        let delta = DVector::from_iterator(kept.len(), kept.iter().map(|&k| self.delta[k]));
        let mut delta_lag = vec![Vec::new(); self.delta_lag.len()];
        for &k in &kept {
            let (j, c) = layout[k];
            delta_lag[j].push(self.delta_lag[j][c]);
        }
        let mut h = Self {
            sigma2_e: self.sigma2_e,
            xi: self.xi,
            phi,
            delta,
            delta_lag: delta_lag.into_iter().map(DVector::from_vec).collect(),
            tau: DVector::zeros(0),
            psi: Vec::new(),
            lag_layer: self.lag_layer,
        };
        h.recompute();
        h
    }

    /// Drops trailing lags beyond `p`.
    pub fn truncate_lags(&mut self, p: usize) {
        let layout = column_layout(&self.ranks());
        let keep: Vec<bool> = layout.iter().map(|&(j, _)| j < p).collect();
        let mut h = self.retain_columns(&keep);
        h.delta_lag.truncate(p);
        h.recompute();
        *self = h;
    }
}

/// Log density of the inverse Gaussian with kernel `t^{−3/2} e^{−(t−ξ)²/(2t)}`,
/// i.e. mean `ξ` and shape `ξ²`, normalized by `ξ / √(2π)`.
pub fn ln_inverse_gaussian(t: f64, xi: f64) -> f64 {
    if !(t > 0.0) || !(xi > 0.0) {
        return f64::NEG_INFINITY;
    }
    xi.ln() - 0.5 * LN_2PI - 1.5 * t.ln() - (t - xi).powi(2) / (2.0 * t)
}

fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + x * x / var)
}

/// Log prior of the parameters given the hyperparameters.
///
/// Support violations (`f ≤ 0`, `λ ∉ (0, λ_max]`, `ξ ≤ 0`) return `−∞`.
pub fn log_prior(params: &ReducedRankVarParams, hyper: &HyperState, cfg: &HyperConfig) -> f64 {
    if !(params.lambda > 0.0 && params.lambda <= cfg.lambda_max) || !(hyper.xi > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = params.dim();
    let mut lp = 0.0;
    for i in 0..d {
        for j in 0..i {
            lp += ln_normal(params.e1[(i, j)], hyper.sigma2_e);
        }
    }
    for &t in params.f.iter() {
        lp += ln_inverse_gaussian(t, hyper.xi);
    }
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    lp -= cfg.lambda_max.ln();
    lp += log_prior_factors(params, hyper);
    // half-normal on ξ
    lp += std::f64::consts::LN_2 + ln_normal(hyper.xi, cfg.xi_prior_sd * cfg.xi_prior_sd);
    lp
}

/// Gaussian log prior of the update factors `L_j` only.
pub fn log_prior_factors(params: &ReducedRankVarParams, hyper: &HyperState) -> f64 {
    let layout = column_layout(&params.ranks());
    let mut lp = 0.0;
    for (k, &(j, c)) in layout.iter().enumerate() {
        let scale = hyper.column_scale(&layout, k);
        for i in 0..params.dim() {
            let prec = hyper.phi[(i, k)] * scale;
            let x = params.l[j][(i, c)];
            lp += 0.5 * (prec.ln() - LN_2PI) - 0.5 * prec * x * x;
        }
    }
    lp
}

/// Log prior of one column of `L_j`, used by the per-column sampler block.
pub fn log_prior_column(params: &ReducedRankVarParams, hyper: &HyperState, lag: usize, col: usize) -> f64 {
    let layout = column_layout(&params.ranks());
    let k = layout.iter().position(|&x| x == (lag, col)).expect("column exists");
    let scale = hyper.column_scale(&layout, k);
    (0..params.dim())
        .map(|i| {
            let prec = hyper.phi[(i, k)] * scale;
            let x = params.l[lag][(i, col)];
            0.5 * (prec.ln() - LN_2PI) - 0.5 * prec * x * x
        })
        .sum()
}

/// Weighted squared norms `Σ_ℓ φ_{ℓk} λ²_{ℓk}` per global column.
fn weighted_squares(params: &ReducedRankVarParams, hyper: &HyperState, layout: &[(usize, usize)]) -> Vec<f64> {
    layout
        .iter()
        .enumerate()
        .map(|(k, &(j, c))| (0..params.dim()).map(|i| hyper.phi[(i, k)] * params.l[j][(i, c)].powi(2)).sum())
        .collect()
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng).max(f64::MIN_POSITIVE)
}

/// One sweep of full-conditional updates for `φ`, `δ`, `δ^{(j)}`, `σ²_e` and `ξ`.
pub fn gibbs_update_hypers<R: Rng + ?Sized>(
    params: &ReducedRankVarParams,
    hyper: &HyperState,
    cfg: &HyperConfig,
    rng: &mut R,
) -> HyperState {
    let mut h = hyper.clone();
    let d = params.dim();
    let ranks = params.ranks();
    let layout = column_layout(&ranks);
    assert_eq!(h.phi.ncols(), layout.len(), "hyperparameters out of sync with factor layout");

    // local precisions
    for (k, &(j, c)) in layout.iter().enumerate() {
        let scale = h.column_scale(&layout, k);
        for i in 0..d {
            let x = params.l[j][(i, c)];
            h.phi[(i, k)] = gamma_draw(cfg.nu1 + 0.5, cfg.nu1 + 0.5 * x * x * scale, rng);
        }
    }

    // global multiplicative process over columns
    let ws = weighted_squares(params, &h, &layout);
    let n = layout.len();
    for m in 0..n {
        let mut rate = 1.0;
        for k in m..n {
            let (j, c) = layout[k];
            rate += 0.5 * (h.tau[k] / h.delta[m]) * h.psi[j][c] * ws[k];
        }
        let shape = cfg.kappa(m) + 0.5 * (d * (n - m)) as f64;
        h.delta[m] = gamma_draw(shape, rate, rng);
        h.recompute();
    }

    // within-lag process
    if h.lag_layer {
        for (j, &r) in ranks.iter().enumerate() {
            let offset: usize = ranks[..j].iter().sum();
            for m in 0..r {
                let mut rate = 1.0;
                for c in m..r {
                    rate += 0.5 * (h.psi[j][c] / h.delta_lag[j][m]) * h.tau[offset + c] * ws[offset + c];
                }
                let shape = cfg.kappa(m) + 0.5 * (d * (r - m)) as f64;
                h.delta_lag[j][m] = gamma_draw(shape, rate, rng);
                h.recompute();
            }
        }
    }

    // latent Cholesky variance
    let n_e = d * (d - 1) / 2;
    let mut ss = 0.0;
    for i in 0..d {
        for j in 0..i {
            ss += params.e1[(i, j)].powi(2);
        }
    }
    h.sigma2_e = 1.0 / gamma_draw(cfg.c1 + 0.5 * n_e as f64, cfg.c1 + 0.5 * ss, rng);

    h.xi = update_xi(&params.f, h.xi, cfg, rng);
    h
}

/// Random-walk Metropolis on `log ξ` given the diagonal factors.
fn update_xi<R: Rng + ?Sized>(f: &DVector<f64>, xi: f64, cfg: &HyperConfig, rng: &mut R) -> f64 {
    let var = cfg.xi_prior_sd * cfg.xi_prior_sd;
    let target =
        |x: f64| -> f64 { f.iter().map(|&t| ln_inverse_gaussian(t, x)).sum::<f64>() - 0.5 * x * x / var + x.ln() };
    let n = f.len() as f64;
    let mut cur = xi;
    let mut cur_lp = target(cur);
    for _ in 0..5 {
        let step = 2.4 / (n * (2.0 + cur)).sqrt().max(1.0);
        let z: f64 = StandardNormal.sample(rng);
        let prop = cur * (step * z).exp();
        let lp = target(prop);
        let u: f64 = rng.random();
        if u.ln() < lp - cur_lp {
            cur = prop;
            cur_lp = lp;
        }
    }
    cur
}

/// Draws `f | ξ` from the inverse-Gaussian prior.
pub fn sample_f<R: Rng + ?Sized>(d: usize, xi: f64, rng: &mut R) -> DVector<f64> {
    let ig = InverseGaussian::new(xi, xi * xi).expect("valid inverse gaussian");
    DVector::from_fn(d, |_, _| ig.sample(rng))
}

/// Draws the update factors `L_j` from their conditional prior.
pub fn sample_factors<R: Rng + ?Sized>(d: usize, hyper: &HyperState, rng: &mut R) -> Vec<DMatrix<f64>> {
    let ranks = hyper.ranks();
    let layout = column_layout(&ranks);
    let mut l: Vec<DMatrix<f64>> = ranks.iter().map(|&r| DMatrix::zeros(d, r)).collect();
    for (k, &(j, c)) in layout.iter().enumerate() {
        let scale = hyper.column_scale(&layout, k);
        for i in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            l[j][(i, c)] = z / (hyper.phi[(i, k)] * scale).sqrt();
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[0.2, -0.05, 0.3, 0.1]);
        assert_eq!(hard_threshold(&m, 0.1), DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.3, 0.0]));
        assert_eq!(hard_threshold(&m, 0.0), m);
        assert_eq!(hard_threshold(&m, 0.3), DMatrix::zeros(2, 2));
    }

    fn toy_params(d: usize, ranks: &[usize]) -> ReducedRankVarParams {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = ReducedRankVarParams::random(d, ranks.len(), 1, &mut rng);
        p.l = ranks.iter().map(|&r| DMatrix::from_element(d, r, 0.3)).collect();
        p.k = ranks.iter().map(|&r| DMatrix::from_element(d, r, 1.0)).collect();
        p.lambda = 0.1;
        p
    }

    #[test]
    fn inverse_gaussian_normalizer_by_quadrature() {
        for &xi in &[0.4, 1.0, 3.0] {
            // ∫ exp(ln_ig(t)) dt over (0, ∞) via t = e^s, trapezoid on a wide grid
            let (lo, hi, n) = (-30.0_f64, 8.0_f64, 200_000);
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let s = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * (ln_inverse_gaussian(s.exp(), xi) + s).exp();
            }
            assert!((acc * h - 1.0).abs() < 1e-8, "xi = {xi}: {}", acc * h);
        }
        // at t = ξ the exponential term vanishes
        let xi = 2.0_f64;
        let expected = -1.5 * xi.ln() + xi.ln() - 0.5 * LN_2PI;
        assert!((ln_inverse_gaussian(xi, xi) - expected).abs() < 1e-14);
    }

    #[test]
    fn lambda_support() {
        let cfg = HyperConfig { lambda_max: 0.5, ..Default::default() };
        let mut p = toy_params(3, &[1]);
        let h = HyperState::initial(3, &[1]);
        p.lambda = 0.6;
        assert_eq!(log_prior(&p, &h, &cfg), f64::NEG_INFINITY);
        p.lambda = 0.0;
        assert_eq!(log_prior(&p, &h, &cfg), f64::NEG_INFINITY);
        p.lambda = 0.4;
        assert!(log_prior(&p, &h, &cfg).is_finite());
    }

    #[test]
    fn zero_factors_reduce_to_log_precisions() {
        let mut p = toy_params(3, &[2, 2]);
        for l in p.l.iter_mut() {
            l.fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = HyperState::sample_prior(3, &[2, 2], &HyperConfig::default(), &mut rng);
        let layout = column_layout(&[2, 2]);
        let mut expected = 0.0;
        for k in 0..4 {
            for i in 0..3 {
                expected += 0.5 * (h.phi[(i, k)] * h.column_scale(&layout, k) / (2.0 * std::f64::consts::PI)).ln();
            }
        }
        assert!((log_prior_factors(&p, &h) - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_factors_give_prior_phi_conditional() {
        // With λ = 0 the conditional is Ga(ν₁ + ½, ν₁): check the mean.
        let mut p = toy_params(2, &[1]);
        p.l[0].fill(0.0);
        let cfg = HyperConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h0 = HyperState::initial(2, &[1]);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += gibbs_update_hypers(&p, &h0, &cfg, &mut rng).phi[(0, 0)];
        }
        let mean = sum / n as f64;
        let exact = (cfg.nu1 + 0.5) / cfg.nu1;
        let se = ((cfg.nu1 + 0.5).sqrt() / cfg.nu1) / (n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact}");
    }

    #[test]
    fn single_entry_delta_shape() {
        // d = p = r = 1: δ₁ | · ~ Ga(κ₁ + ½, 1 + ½ φ λ²)
        let mut p = toy_params(1, &[1]);
        p.l[0][(0, 0)] = 0.8;
        let cfg = HyperConfig::default();
        let mut h = HyperState::initial(1, &[1]);
        h.phi[(0, 0)] = 2.0;
        let rate = 1.0 + 0.5 * 2.0 * 0.64;
        let shape = cfg.kappa1 + 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            // hold φ fixed by re-seeding the state each time; φ is updated first,
            // so compare against the δ draw with φ from the same sweep
            let g = gibbs_update_hypers(&p, &h, &cfg, &mut rng);
            let r = 1.0 + 0.5 * g.phi[(0, 0)] * 0.64;
            s1 += g.delta[0] * r;
            s2 += (g.delta[0] * r).powi(2);
        }
        // δ·rate ~ Ga(shape, 1): mean = var = shape
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - shape).abs() < 4.0 * (shape / n as f64).sqrt(), "{mean}");
        assert!((var - shape).abs() < 0.1 * shape, "{var}");
        let _ = rate;
    }

    #[test]
    fn gibbs_preserves_products() {
        let p = toy_params(3, &[2, 2, 1]);
        let cfg = HyperConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut h = HyperState::initial(3, &[2, 2, 1]);
        for _ in 0..50 {
            h = gibbs_update_hypers(&p, &h, &cfg, &mut rng);
            assert!(h.phi.iter().chain(h.delta.iter()).all(|v| *v > 0.0));
            assert!(h.sigma2_e > 0.0 && h.xi > 0.0);
            let mut acc = 1.0;
            for k in 0..h.delta.len() {
                acc *= h.delta[k];
                assert!((h.tau[k] - acc).abs() <= 1e-12 * acc);
            }
            for (j, dl) in h.delta_lag.iter().enumerate() {
                let mut acc = 1.0;
                for c in 0..dl.len() {
                    acc *= dl[c];
                    assert!((h.psi[j][c] - acc).abs() <= 1e-12 * acc);
                }
            }
        }
    }

    #[test]
    fn rank_one_drops_inner_layer() {
        let h = HyperState::initial(4, &[1, 1, 1]);
        assert!(!h.lag_layer);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = HyperState::sample_prior(4, &[1, 1, 1], &HyperConfig::default(), &mut rng);
        assert!(h.psi.iter().all(|v| v.iter().all(|&x| x == 1.0)));
    }

    #[test]
    fn retain_columns_remaps() {
        let mut h = HyperState::initial(2, &[2, 1]);
        h.delta = DVector::from_vec(vec![2.0, 3.0, 5.0]);
        h.recompute();
        let kept = h.retain_columns(&[true, false, true]);
        assert_eq!(kept.ranks(), vec![1, 1]);
        assert_eq!(kept.delta.as_slice(), &[2.0, 5.0]);
        assert_eq!(kept.tau.as_slice(), &[2.0, 10.0]);
    }
}
