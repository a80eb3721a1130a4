use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::McmcConfig;
use crate::linalg::cholesky_jittered;

/// Ridge added to every adapted covariance.
pub const ADAPT_RIDGE: f64 = 1e-8;

/// Proposal covariance handed back by [`adapt_proposal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub cov: DMatrix<f64>,
    pub scale: f64,
    /// False when the spherical random-walk proposal is in use.
    pub adapted: bool,
}

/// Window length `S` used at iteration `iter`.
pub fn window_size(iter: usize, cfg: &McmcConfig) -> usize {
    (cfg.s_min + iter / cfg.s_rate.max(1)).min(cfg.s_max)
}

/// Proposal covariance from the accepted-draw buffer.
///
/// Before `adapt_start` (or with fewer than two accepted draws in the window)
/// this is the spherical `I` with unit scale. Afterwards it is the empirical
/// covariance of the last `S` accepted draws times `2.38²/dim`, plus a ridge.
pub fn adapt_proposal(history: &[DVector<f64>], dim: usize, iter: usize, cfg: &McmcConfig) -> Proposal {
    let spherical = Proposal { cov: DMatrix::identity(dim, dim), scale: 1.0, adapted: false };
    if iter < cfg.adapt_start {
        return spherical;
    }
    let s = window_size(iter, cfg).min(history.len());
    if s < 2 {
        return spherical;
    }
    let window = &history[history.len() - s..];
    let mean = window.iter().fold(DVector::zeros(dim), |acc, x| acc + x) / s as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for x in window {
        let c = x - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov *= 2.38 * 2.38 / (dim as f64 * (s - 1) as f64);
    for i in 0..dim {
        cov[(i, i)] += ADAPT_RIDGE;
    }
    Proposal { cov, scale: 1.0, adapted: true }
}

/// Acceptance summary of one sampler block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub name: String,
    /// Acceptance rate of each batch of `adapt_every` proposals.
    pub trace: Vec<f64>,
    pub overall: f64,
    /// Rate over the most recent (up to 2000) proposals.
    pub recent: f64,
}

const RECENT: usize = 2000;

/// A random-walk Metropolis block with covariance and scale adaptation.
#[derive(Debug, Clone)]
pub struct AdaptiveBlock {
    name: String,
    dim: usize,
    base_sd: f64,
    log_scale: f64,
    factor: Option<DMatrix<f64>>,
    history: VecDeque<DVector<f64>>,
    n_prop: u64,
    n_acc: u64,
    recent: VecDeque<bool>,
    batch: (u32, u32),
    trace: Vec<f64>,
}

impl AdaptiveBlock {
    pub fn new(name: impl Into<String>, dim: usize, base_sd: f64) -> Self {
        Self {
            name: name.into(),
            dim,
            base_sd,
            log_scale: 0.0,
            factor: None,
            history: VecDeque::new(),
            n_prop: 0,
            n_acc: 0,
            recent: VecDeque::with_capacity(RECENT),
            batch: (0, 0),
            trace: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Current proposal covariance (including the scale multiplier).
    pub fn proposal_cov(&self) -> DMatrix<f64> {
        let s2 = (2.0 * self.log_scale).exp();
        match &self.factor {
            Some(l) => l * l.transpose() * s2,
            None => DMatrix::identity(self.dim, self.dim) * (s2 * self.base_sd * self.base_sd),
        }
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = self.log_scale.exp();
        match &self.factor {
            Some(l) => current + l * z * s,
            None => current + z * (s * self.base_sd),
        }
    }

    /// Records the outcome of one proposal and adapts.
    pub fn record(&mut self, accepted: bool, state: &DVector<f64>, iter: usize, cfg: &McmcConfig) {
        self.n_prop += 1;
        self.batch.1 += 1;
        if accepted {
            self.n_acc += 1;
            self.batch.0 += 1;
            if self.history.len() == cfg.s_max.max(2) {
                self.history.pop_front();
            }
            self.history.push_back(state.clone());
        }
        if self.recent.len() == RECENT {
            self.recent.pop_front();
        }
        self.recent.push_back(accepted);
        if self.batch.1 as usize >= cfg.adapt_every.max(1) {
            self.trace.push(f64::from(self.batch.0) / f64::from(self.batch.1));
            self.batch = (0, 0);
        }

        if !cfg.adapting(iter) {
            return;
        }
        let target = 0.5 * (cfg.accept_lo + cfg.accept_hi);
        let a = if accepted { 1.0 } else { 0.0 };
        self.log_scale += cfg.rm_c * (iter.max(1) as f64).powf(-cfg.rm_exponent) * (a - target);
        self.log_scale = self.log_scale.clamp(-30.0, 30.0);

        if iter >= cfg.adapt_start && iter % cfg.adapt_every.max(1) == 0 {
            let hist: Vec<DVector<f64>> = self.history.iter().cloned().collect();
            let prop = adapt_proposal(&hist, self.dim, iter, cfg);
            self.factor = if prop.adapted { cholesky_jittered(&prop.cov).map(|(c, _)| c.l()) } else { None };
        }
    }

    /// One Metropolis step against `log_target`; returns whether it moved.
    ///
    /// Non-finite proposal targets are rejections.
    pub fn step<R, F>(
        &mut self,
        current: &mut DVector<f64>,
        current_lp: &mut f64,
        log_target: F,
        iter: usize,
        cfg: &McmcConfig,
        rng: &mut R,
    ) -> bool
    where
        R: Rng + ?Sized,
        F: FnOnce(&DVector<f64>) -> f64,
    {
        let prop = self.propose(current, rng);
        let lp = log_target(&prop);
        let u: f64 = rng.random();
        let accept = lp.is_finite() && u.ln() < lp - *current_lp;
        if accept {
            *current = prop;
            *current_lp = lp;
        }
        self.record(accept, current, iter, cfg);
        accept
    }

    pub fn acceptance(&self) -> BlockAcceptance {
        let recent = if self.recent.is_empty() {
            0.0
        } else {
            self.recent.iter().filter(|&&a| a).count() as f64 / self.recent.len() as f64
        };
        BlockAcceptance {
            name: self.name.clone(),
            trace: self.trace.clone(),
            overall: if self.n_prop == 0 { 0.0 } else { self.n_acc as f64 / self.n_prop as f64 },
            recent,
        }
    }
}

/// Runs a single adaptive block against an arbitrary log density.
///
/// Returns `n_keep` states taken every `thin` iterations after `n_burn`.
pub fn run_adaptive_metropolis<R, F>(
    log_target: F,
    init: DVector<f64>,
    base_sd: f64,
    cfg: &McmcConfig,
    rng: &mut R,
) -> (Vec<DVector<f64>>, AdaptiveBlock)
where
    R: Rng + ?Sized,
    F: Fn(&DVector<f64>) -> f64,
{
    let mut block = AdaptiveBlock::new("target", init.len(), base_sd);
    let mut x = init;
    let mut lp = log_target(&x);
    let mut out = Vec::with_capacity(cfg.n_keep);
    for iter in 1..=cfg.n_iter() {
        block.step(&mut x, &mut lp, &log_target, iter, cfg, rng);
        if cfg.is_kept(iter) {
            out.push(x.clone());
        }
    }
    (out, block)
}
