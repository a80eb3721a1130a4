mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrvar::priors::ln_inverse_gaussian;
use rrvar::sampler::{read_chain_binary, run_adaptive_metropolis, write_chain_binary};
use rrvar::simgen::simulate_var;
use rrvar::{run_mcmc, McmcConfig, ReducedRankVarParams, Sample};

fn short_cfg(seed: u64) -> McmcConfig {
    McmcConfig {
        n_burn: 600,
        n_keep: 400,
        adapt_start: 300,
        prune_iter: 200,
        p_max: 2,
        r_init: 1,
        seed,
        ..Default::default()
    }
}

fn ar1_sample(a: f64, t: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ReducedRankVarParams {
        e1: DMatrix::zeros(1, 1),
        f: DVector::from_element(1, 1.0),
        lambda: 0.0,
        l: vec![DMatrix::from_element(1, 1, 1.0)],
        k: vec![DMatrix::from_element(1, 1, 1.0)],
    };
    // L = K = 1 with Ω = 1 gives A = 1/√2
    let (_, model) = rrvar::varcore::forward_map(&params).unwrap();
    assert!((model.a[0][(0, 0)] - a).abs() < 1e-12);
    simulate_var(&params, t, &mut rng).unwrap()
}

#[test]
fn frozen_sampler_matches_gaussian_marginals() {
    let p = common::frozen_gaussian_ks(11, 50_000, 50);
    assert!(p.iter().all(|&v| v > 0.01), "KS p-values {p:?}");
}

#[test]
fn kolmogorov_tail_reference_points() {
    // tabulated critical values of the Kolmogorov distribution
    assert!((common::kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
    assert!((common::kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
    assert_eq!(common::kolmogorov_q(0.1), 1.0);
}

#[test]
fn log_scale_jacobian_recovers_inverse_gaussian() {
    let xi = 1.3;
    let target = move |s: &DVector<f64>| ln_inverse_gaussian(s[0].exp(), xi) + s[0];
    let cfg = McmcConfig { n_burn: 1000, n_keep: 20_000, thin: 20, freeze_adaptation: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (draws, _) = run_adaptive_metropolis(target, DVector::zeros(1), 1.0, &cfg, &mut rng);
    let x: Vec<f64> = draws.iter().map(|v| v[0].exp()).collect();
    // IG(μ = ξ, shape = ξ²)
    let (mu, lam) = (xi, xi * xi);
    let cdf = |t: f64| {
        let a = (lam / t).sqrt();
        common::phi(a * (t / mu - 1.0)) + (2.0 * lam / mu).exp() * common::phi(-a * (t / mu + 1.0))
    };
    let (_, p) = common::ks_test(&x, cdf);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn geweke_successive_conditional() {
    let z = common::geweke_prior_hierarchy(2024, 40_000, 200_000);
    let crit = common::bonferroni_z(0.01, z.len());
    for (label, v) in common::GEWEKE_LABELS.iter().zip(&z) {
        assert!(v.abs() < crit, "{label}: z = {v}, critical {crit}");
    }
}

#[test]
fn geweke_detects_a_mismatched_update() {
    let prior = rrvar::priors::HyperConfig::default();
    let update = rrvar::priors::HyperConfig { kappa2: prior.kappa2 + 1.0, ..prior.clone() };
    let z = common::geweke_with(&prior, &update, 2024, 40_000, 200_000);
    let crit = common::bonferroni_z(0.01, z.len());
    assert!(z.iter().any(|v| v.abs() > crit), "{z:?}");
}

#[test]
fn adapted_covariance_tracks_target_correlation() {
    let rho: f64 = 0.9;
    let det = 1.0 - rho * rho;
    let target = move |x: &DVector<f64>| -0.5 * (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / det;
    let cfg = McmcConfig { n_burn: 20_000, n_keep: 10, adapt_start: 2000, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (_, block) = run_adaptive_metropolis(target, DVector::zeros(2), 0.5, &cfg, &mut rng);
    let c = block.proposal_cov();
    let corr = c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt();
    assert!(corr > 0.8, "adapted correlation {corr}");
    let acc = block.acceptance().recent;
    assert!((0.2..=0.55).contains(&acc), "recent acceptance {acc}");
}

#[test]
fn ar1_posterior_concentrates_on_truth() {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let sample = ar1_sample(a, 400, 3);
    let cfg = McmcConfig {
        n_burn: 3000,
        n_keep: 2000,
        adapt_start: 1500,
        prune_iter: 500,
        p_max: 1,
        seed: 4,
        ..short_cfg(0)
    };
    let chain = run_mcmc(&sample, &cfg, None).unwrap();
    let mean_a = chain.a_draws.iter().map(|v| v[0][(0, 0)]).sum::<f64>() / chain.len() as f64;
    assert!((mean_a - a).abs() < 0.1, "posterior mean {mean_a}");
    // f = 1 fixes Γ(0) = 1; the innovation variance is 1 − a²
    let omega = chain.posterior_mean_omega()[(0, 0)];
    assert!((omega - 1.0).abs() < 0.2, "posterior mean Ω {omega}");
    let sigma = chain.sigma_draws.iter().map(|s| s[(0, 0)]).sum::<f64>() / chain.len() as f64;
    assert!((sigma - 0.5).abs() < 0.1, "posterior mean Σ {sigma}");
}

#[test]
fn retained_draws_are_causal() {
    let (_, sample) = common::random_case(3, 2, 1, 60, 17);
    let chain = run_mcmc(&sample, &short_cfg(1), None).unwrap();
    assert_eq!(chain.spectral_radii.len(), chain.len());
    assert!(chain.spectral_radii.iter().all(|&r| r < 1.0));
}

#[test]
fn fixed_seed_is_deterministic() {
    let (_, sample) = common::random_case(3, 1, 1, 40, 2);
    let a = run_mcmc(&sample, &short_cfg(9), None).unwrap();
    let b = run_mcmc(&sample, &short_cfg(9), None).unwrap();
    assert_eq!(a.omega_draws, b.omega_draws);
    assert_eq!(a.log_post_trace, b.log_post_trace);
    let c = run_mcmc(&sample, &short_cfg(10), None).unwrap();
    assert_ne!(a.omega_draws, c.omega_draws);
}

#[test]
fn rank_deficient_data_warns() {
    let (_, sample) = common::random_case(2, 1, 1, 40, 6);
    let x = sample.data();
    let dup = DMatrix::from_fn(x.nrows(), 3, |t, j| x[(t, j.min(1))]);
    let chain = run_mcmc(&Sample::new(dup).unwrap(), &short_cfg(2), None).unwrap();
    assert!(chain.warnings.iter().any(|w| w.contains("rank 2 < dimension 3")), "{:?}", chain.warnings);
}

#[test]
fn binary_draws_round_trip() {
    let (_, sample) = common::random_case(3, 1, 1, 30, 12);
    let chain = run_mcmc(&sample, &short_cfg(3), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.bin");
    write_chain_binary(&path, &chain).unwrap();
    let back = read_chain_binary(&path).unwrap();
    assert_eq!(back.omega, chain.omega_draws);
    assert_eq!(back.a, chain.a_draws);
    assert_eq!(back.sigma, chain.sigma_draws);
}

#[test]
fn invalid_schedule_is_rejected() {
    let (_, sample) = common::random_case(2, 1, 1, 30, 1);
    let cfg = McmcConfig { n_burn: 10, n_keep: 10, adapt_start: 50, ..Default::default() };
    assert!(run_mcmc(&sample, &cfg, None).is_err());
}
