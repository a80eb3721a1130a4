//! Adaptive Metropolis-within-Gibbs sampler for the reduced-rank causal VAR.
//!
//! One sweep updates, in order: the latent Cholesky entries `E1` (joint move),
//! `log f`, `log λ`, each column of each `L_j`, each `K_j`, and then the
//! shrinkage hyperparameters by Gibbs. `K_j` only enters the likelihood through
//! its column span and orientation, so it is kept at unit Frobenius norm.

mod adapt;
mod glasso;
mod io;
mod prune;

pub use adapt::{
    adapt_proposal, run_adaptive_metropolis, window_size, AdaptiveBlock, BlockAcceptance, Proposal, ADAPT_RIDGE,
};
pub use glasso::{graphical_lasso, ridge_inverse};
pub use io::{read_chain_binary, write_chain_binary, write_chain_csv, DrawSet};
pub use prune::{prune_ranks, Pruned};

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{loglik_rank_one, loglik_recursive, Sample};
use crate::linalg::row_covariance;
use crate::priors::{column_layout, gibbs_update_hypers, log_prior, HyperConfig, HyperState};
use crate::varcore::{companion_spectral_radius, forward_map, modified_cholesky, ReducedRankVarParams};

/// Warm-start estimator for the initial precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Graphical lasso, falling back to the ridge inverse if it fails.
    Glasso,
    Ridge,
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub adapt_start: usize,
    pub adapt_every: usize,
    pub accept_lo: f64,
    pub accept_hi: f64,
    pub prune_iter: usize,
    pub prune_threshold: f64,
    pub p_max: usize,
    pub r_init: usize,
    /// Window `S(iter) = min(s_max, s_min + iter / s_rate)`.
    pub s_min: usize,
    pub s_max: usize,
    pub s_rate: usize,
    /// Robbins-Monro step `rm_c / iter^rm_exponent` on the log proposal scale.
    pub rm_c: f64,
    pub rm_exponent: f64,
    /// Disable every form of adaptation.
    pub freeze_adaptation: bool,
    /// Stop adapting once burn-in ends.
    pub freeze_at_burn: bool,
    pub warm_start: WarmStart,
    /// Warm-start penalty, relative to the mean sample variance.
    pub warm_start_penalty: f64,
    /// Uniform prior upper end for λ; derived from the initial `E1` when unset.
    pub lambda_max: Option<f64>,
    pub hyper: HyperConfig,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_burn: 5000,
            n_keep: 5000,
            thin: 1,
            adapt_start: 3500,
            adapt_every: 100,
            accept_lo: 0.25,
            accept_hi: 0.50,
            prune_iter: 1000,
            prune_threshold: 0.1,
            p_max: 10,
            r_init: 3,
            s_min: 200,
            s_max: 2000,
            s_rate: 10,
            rm_c: 1.0,
            rm_exponent: 0.6,
            freeze_adaptation: false,
            freeze_at_burn: false,
            warm_start: WarmStart::Glasso,
            warm_start_penalty: 0.1,
            lambda_max: None,
            hyper: HyperConfig::default(),
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn n_iter(&self) -> usize {
        self.n_burn + self.n_keep * self.thin.max(1)
    }

    pub fn is_kept(&self, iter: usize) -> bool {
        iter > self.n_burn && (iter - self.n_burn) % self.thin.max(1) == 0
    }

    pub fn adapting(&self, iter: usize) -> bool {
        !self.freeze_adaptation && !(self.freeze_at_burn && iter > self.n_burn)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.accept_lo && self.accept_lo < self.accept_hi && self.accept_hi < 1.0) {
            return Err(Error::Contract(format!(
                "acceptance band ({}, {}) must satisfy 0 < lo < hi < 1",
                self.accept_lo, self.accept_hi
            )));
        }
        if !self.freeze_adaptation && self.adapt_start >= self.n_iter() {
            return Err(Error::Contract(format!(
                "adapt_start {} must be below the iteration count {}",
                self.adapt_start,
                self.n_iter()
            )));
        }
        if self.n_keep == 0 || self.p_max == 0 || self.r_init == 0 {
            return Err(Error::Contract("n_keep, p_max and r_init must be positive".into()));
        }
        if self.s_min < 2 || self.s_max < self.s_min || self.adapt_every == 0 {
            return Err(Error::Contract("invalid adaptation window settings".into()));
        }
        Ok(())
    }
}

/// Final model size after pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedOrder {
    pub p: usize,
    pub ranks: Vec<usize>,
}

/// Retained draws and diagnostics of one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOutput {
    pub omega_draws: Vec<DMatrix<f64>>,
    pub a_draws: Vec<Vec<DMatrix<f64>>>,
    pub sigma_draws: Vec<DMatrix<f64>>,
    /// Companion spectral radius of each retained draw.
    pub spectral_radii: Vec<f64>,
    pub acceptance: Vec<BlockAcceptance>,
    pub pruned_order: PrunedOrder,
    /// Log posterior (up to a constant) after every sweep.
    pub log_post_trace: Vec<f64>,
    /// Proposals rejected because the likelihood could not be evaluated.
    pub conditioning_rejections: usize,
    pub warnings: Vec<String>,
    /// Hyperconstants actually used, including the resolved `λ_max`.
    pub hyper_config: HyperConfig,
    pub final_params: ReducedRankVarParams,
}

impl ChainOutput {
    pub fn dim(&self) -> usize {
        self.omega_draws.first().map_or(0, |m| m.nrows())
    }

    pub fn len(&self) -> usize {
        self.omega_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_draws.is_empty()
    }

    /// Entrywise posterior mean of `Ω`.
    pub fn posterior_mean_omega(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = self.len().max(1) as f64;
        self.omega_draws.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m) / n
    }

    /// Posterior mean of `|Ω_ij|`, the edge score used for ROC curves.
    pub fn posterior_mean_abs_omega(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = self.len().max(1) as f64;
        self.omega_draws.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m.abs()) / n
    }
}

fn log_likelihood(params: &ReducedRankVarParams, sample: &Sample) -> Result<f64> {
    if params.ranks().iter().all(|&r| r == 1) {
        loglik_rank_one(params, sample)
    } else {
        loglik_recursive(params, sample)
    }
}

fn lower_entries(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    DVector::from_iterator(d * (d - 1) / 2, (0..d).flat_map(|i| (0..i).map(move |j| m[(i, j)])))
}

fn set_lower_entries(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    let d = m.nrows();
    let mut it = v.iter();
    for i in 0..d {
        for j in 0..i {
            m[(i, j)] = *it.next().expect("length checked");
        }
    }
}

fn normalize(m: &mut DMatrix<f64>) {
    let n = m.norm();
    if n > 0.0 {
        *m /= n;
    }
}

/// Numerical rank of the centered data matrix.
fn data_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax * x.nrows().max(x.ncols()) as f64).count()
}

/// Chain state shared by the block updates.
struct Chain<'a> {
    sample: &'a Sample,
    cfg: &'a McmcConfig,
    hcfg: HyperConfig,
    params: ReducedRankVarParams,
    hyper: HyperState,
    loglik: f64,
    logprior: f64,
    rejections: usize,
}

impl Chain<'_> {
    fn log_post(&self) -> f64 {
        self.loglik + self.logprior
    }

    /// Evaluates a candidate; `None` for support violations or failed likelihoods.
    fn evaluate(&mut self, cand: &ReducedRankVarParams) -> Option<(f64, f64)> {
        let lp = log_prior(cand, &self.hyper, &self.hcfg);
        if !lp.is_finite() {
            return None;
        }
        match log_likelihood(cand, self.sample) {
            Ok(ll) if ll.is_finite() => Some((ll, lp)),
            Ok(_) | Err(_) => {
                self.rejections += 1;
                None
            }
        }
    }

    /// Generic Metropolis update of one coordinate block.
    ///
    /// `get` reads the block's unconstrained coordinates, `put` writes them into
    /// a candidate, and `log_jac` adds the log Jacobian of the transform.
    fn update<R: Rng + ?Sized>(
        &mut self,
        block: &mut AdaptiveBlock,
        iter: usize,
        rng: &mut R,
        get: impl Fn(&ReducedRankVarParams) -> DVector<f64>,
        put: impl Fn(&mut ReducedRankVarParams, &DVector<f64>),
        log_jac: impl Fn(&DVector<f64>) -> f64,
    ) {
        let cur = get(&self.params);
        let prop = block.propose(&cur, rng);
        let mut cand = self.params.clone();
        put(&mut cand, &prop);
        let mut accepted = false;
        if let Some((ll, lp)) = self.evaluate(&cand) {
            let ratio = ll + lp + log_jac(&prop) - self.log_post() - log_jac(&cur);
            let u: f64 = rng.random();
            if u.ln() < ratio {
                self.params = cand;
                self.loglik = ll;
                self.logprior = lp;
                accepted = true;
            }
        }
        let state = get(&self.params);
        block.record(accepted, &state, iter, self.cfg);
    }
}

fn initial_params<R: Rng + ?Sized>(
    sample: &Sample,
    cfg: &McmcConfig,
    rng: &mut R,
    warnings: &mut Vec<String>,
) -> Result<ReducedRankVarParams> {
    let d = sample.dim();
    let t = sample.len();
    let s = row_covariance(sample.data(), true);
    let scale = s.trace() / d as f64;
    let rho = cfg.warm_start_penalty * if scale > 0.0 { scale } else { 1.0 };
    let omega = match cfg.warm_start {
        WarmStart::Glasso => graphical_lasso(&s, rho, 100, 1e-4).or_else(|| {
            warnings.push("graphical lasso warm start failed; using the ridge inverse".into());
            ridge_inverse(&s, rho)
        }),
        WarmStart::Ridge => ridge_inverse(&s, rho),
    }
    .ok_or_else(|| Error::Init("warm-start precision is not positive definite".into()))?;
    let (e1, f) = modified_cholesky(&omega)?;

    let p = cfg.p_max.min(t / 2).max(1);
    let r = cfg.r_init.min(d);
    let mut l = Vec::with_capacity(p);
    let mut k = Vec::with_capacity(p);
    for j in 1..=p {
        let n = Normal::new(0.0, (1.0 / j as f64).sqrt()).expect("valid normal");
        l.push(DMatrix::from_fn(d, r, |_, _| n.sample(rng)));
        let mut kj = DMatrix::from_fn(d, r, |_, _| n.sample(rng));
        normalize(&mut kj);
        k.push(kj);
    }
    ReducedRankVarParams::new(e1, f, 0.0, l, k)
}

/// Runs one chain.
///
/// With `init` unset the chain starts from a warm-start precision, order
/// `min(p_max, T/2)` and rank `r_init`.
pub fn run_mcmc(sample: &Sample, cfg: &McmcConfig, init: Option<ReducedRankVarParams>) -> Result<ChainOutput> {
    cfg.validate()?;
    let d = sample.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut warnings = Vec::new();

    let rank = data_rank(sample.data());
    if rank < d {
        warnings.push(format!("sample data has rank {rank} < dimension {d}; precision scale is weakly identified"));
    }

    let mut params = match init {
        Some(p) => {
            p.validate()?;
            if p.dim() != d {
                return Err(Error::Dimension(format!("init has d = {}, sample has d = {d}", p.dim())));
            }
            p
        }
        None => initial_params(sample, cfg, &mut rng, &mut warnings)?,
    };
    for kj in params.k.iter_mut() {
        normalize(kj);
    }
    let max_e = params.e1.amax();
    let mut hcfg = cfg.hyper.clone();
    hcfg.lambda_max = cfg.lambda_max.unwrap_or(if max_e > 0.0 { 1.5 * max_e } else { 1.0 });
    if !(params.lambda > 0.0 && params.lambda <= hcfg.lambda_max) {
        params.lambda = hcfg.lambda_max / 15.0;
    }

    let mut hyper = HyperState::initial(d, &params.ranks());
    hyper.xi = params.f.mean();
    let n_e = d * (d - 1) / 2;
    if n_e > 0 {
        hyper.sigma2_e = (params.e1.norm_squared() / n_e as f64).max(1e-2);
    }

    let loglik = log_likelihood(&params, sample).map_err(|e| Error::Init(format!("log-likelihood at start: {e}")))?;
    let logprior = log_prior(&params, &hyper, &hcfg);
    if !(loglik + logprior).is_finite() {
        return Err(Error::Init("non-finite log posterior at the initial state".into()));
    }

    let mut chain = Chain { sample, cfg, hcfg, params, hyper, loglik, logprior, rejections: 0 };

    let sd = |dim: usize| 0.1 * 2.38 / (dim.max(1) as f64).sqrt();
    let mut e_block = AdaptiveBlock::new("E1", n_e, sd(n_e));
    let mut f_block = AdaptiveBlock::new("log f", d, sd(d));
    let mut lam_block = AdaptiveBlock::new("log lambda", 1, 0.2);
    let new_l_blocks = |ranks: &[usize]| -> Vec<AdaptiveBlock> {
        column_layout(ranks)
            .iter()
            .map(|&(j, c)| AdaptiveBlock::new(format!("L{}[{}]", j + 1, c + 1), d, sd(d)))
            .collect()
    };
    let new_k_block = |j: usize, r: usize| AdaptiveBlock::new(format!("K{}", j + 1), d * r, sd(d * r));
    let mut l_blocks = new_l_blocks(&chain.params.ranks());
    let mut k_blocks: Vec<AdaptiveBlock> =
        chain.params.ranks().iter().enumerate().map(|(j, &r)| new_k_block(j, r)).collect();

    let n_iter = cfg.n_iter();
    let mut out = ChainOutput {
        omega_draws: Vec::with_capacity(cfg.n_keep),
        a_draws: Vec::with_capacity(cfg.n_keep),
        sigma_draws: Vec::with_capacity(cfg.n_keep),
        spectral_radii: Vec::with_capacity(cfg.n_keep),
        acceptance: Vec::new(),
        pruned_order: PrunedOrder { p: 0, ranks: Vec::new() },
        log_post_trace: Vec::with_capacity(n_iter),
        conditioning_rejections: 0,
        warnings,
        hyper_config: chain.hcfg.clone(),
        final_params: chain.params.clone(),
    };

    for iter in 1..=n_iter {
        if n_e > 0 {
            chain.update(
                &mut e_block,
                iter,
                &mut rng,
                |p| lower_entries(&p.e1),
                |p, v| set_lower_entries(&mut p.e1, v),
                |_| 0.0,
            );
        }
        chain.update(&mut f_block, iter, &mut rng, |p| p.f.map(f64::ln), |p, v| p.f = v.map(f64::exp), |v| v.sum());
        if n_e > 0 {
            chain.update(
                &mut lam_block,
                iter,
                &mut rng,
                |p| DVector::from_element(1, p.lambda.ln()),
                |p, v| p.lambda = v[0].exp(),
                |v| v[0],
            );
        }
        let layout = column_layout(&chain.params.ranks());
        for (g, &(j, c)) in layout.iter().enumerate() {
            chain.update(
                &mut l_blocks[g],
                iter,
                &mut rng,
                |p| p.l[j].column(c).into_owned(),
                |p, v| p.l[j].set_column(c, v),
                |_| 0.0,
            );
        }
        for (j, block) in k_blocks.iter_mut().enumerate() {
            if block.dim() == 0 {
                continue;
            }
            let shape = chain.params.k[j].shape();
            chain.update(
                block,
                iter,
                &mut rng,
                |p| DVector::from_column_slice(p.k[j].as_slice()),
                |p, v| {
                    let mut m = DMatrix::from_column_slice(shape.0, shape.1, v.as_slice());
                    normalize(&mut m);
                    p.k[j] = m;
                },
                |_| 0.0,
            );
        }
        chain.hyper = gibbs_update_hypers(&chain.params, &chain.hyper, &chain.hcfg, &mut rng);
        chain.logprior = log_prior(&chain.params, &chain.hyper, &chain.hcfg);

        if iter == cfg.prune_iter {
            let before = chain.params.ranks();
            let pruned = prune_ranks(&chain.params, &chain.hyper, cfg.prune_threshold);
            if let Some(w) = &pruned.warning {
                warn!("{w}");
                out.warnings.push(w.clone());
            }
            let candidate = pruned.params;
            match log_likelihood(&candidate, sample) {
                Ok(ll) if ll.is_finite() => {
                    let mut kept = pruned.keep.iter();
                    l_blocks.retain(|_| *kept.next().expect("one flag per column"));
                    if pruned.warning.is_some() {
                        l_blocks = new_l_blocks(&candidate.ranks());
                    }
                    let ranks = candidate.ranks();
                    k_blocks = ranks
                        .iter()
                        .enumerate()
                        .map(|(j, &r)| match k_blocks.get(j) {
                            Some(b) if b.dim() == d * r && pruned.warning.is_none() => b.clone(),
                            _ => new_k_block(j, r),
                        })
                        .collect();
                    debug!("pruned ranks {before:?} -> {ranks:?}");
                    chain.params = candidate;
                    chain.hyper = pruned.hyper;
                    chain.loglik = ll;
                    chain.logprior = log_prior(&chain.params, &chain.hyper, &chain.hcfg);
                }
                _ => {
                    let w = "pruned model failed to evaluate; keeping the unpruned model".to_string();
                    warn!("{w}");
                    out.warnings.push(w);
                }
            }
        }

        out.log_post_trace.push(chain.log_post());
        if cfg.is_kept(iter) {
            let (_, model) = forward_map(&chain.params)?;
            out.spectral_radii.push(companion_spectral_radius(&model.a)?);
            out.omega_draws.push(model.omega);
            out.a_draws.push(model.a);
            out.sigma_draws.push(model.sigma);
        }
    }

    let mut blocks: Vec<&AdaptiveBlock> = Vec::new();
    if n_e > 0 {
        blocks.push(&e_block);
    }
    blocks.push(&f_block);
    if n_e > 0 {
        blocks.push(&lam_block);
    }
    blocks.extend(l_blocks.iter());
    blocks.extend(k_blocks.iter().filter(|b| b.dim() > 0));
    out.acceptance = blocks.iter().map(|b| b.acceptance()).collect();
    for a in &out.acceptance {
        if a.recent < cfg.accept_lo - 0.05 || a.recent > cfg.accept_hi + 0.05 {
            out.warnings.push(format!(
                "block {} acceptance {:.3} over the last proposals is outside [{:.2}, {:.2}]",
                a.name,
                a.recent,
                cfg.accept_lo - 0.05,
                cfg.accept_hi + 0.05
            ));
        }
    }
    out.pruned_order = PrunedOrder { p: chain.params.order(), ranks: chain.params.ranks() };
    out.conditioning_rejections = chain.rejections;
    out.final_params = chain.params;
    Ok(out)
}
