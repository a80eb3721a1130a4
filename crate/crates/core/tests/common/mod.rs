//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrvar::linalg::{op_norm, rel_frobenius, sym_eigenvalues};
use rrvar::simgen::simulate_var;
use rrvar::varcore::{companion_spectral_radius, forward_map, solve_stationary_covariance};
use rrvar::{ReducedRankVarParams, Sample};

/// Random parameters with N(0, 1) entries, reproducible from `seed`.
pub fn random_params(d: usize, p: usize, r: usize, seed: u64) -> ReducedRankVarParams {
    ReducedRankVarParams::random(d, p, r, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_case(d: usize, p: usize, r: usize, t: usize, seed: u64) -> (ReducedRankVarParams, Sample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ReducedRankVarParams::random(d, p, r, &mut rng);
    let sample = simulate_var(&params, t, &mut rng).expect("simulation");
    (params, sample)
}

/// Like [`random_case`] with `E1` scaled by `d^{-1/2}`, which keeps `Ω`
/// well conditioned at larger `d`.
pub fn scaled_case(d: usize, p: usize, r: usize, t: usize, seed: u64) -> (ReducedRankVarParams, Sample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ReducedRankVarParams::random(d, p, r, &mut rng);
    params.e1 /= (d as f64).sqrt();
    let sample = simulate_var(&params, t, &mut rng).expect("simulation");
    (params, sample)
}

/// Companion spectral radius of the VAR form.
pub fn radius(params: &ReducedRankVarParams) -> Result<f64, String> {
    let (_, model) = forward_map(params).map_err(|e| e.to_string())?;
    companion_spectral_radius(&model.a).map_err(|e| e.to_string())
}

/// Löwner increments are PSD with exactly `r_j` clearly positive eigenvalues,
/// `U_jᵀ C_{j−1}⁻¹ U_j` is a contraction and `V_jᵀ D_{j−1}⁻¹ V_j = I`.
pub fn check_chain(params: &ReducedRankVarParams) -> Result<(), String> {
    let (st, _) = forward_map(params).map_err(|e| e.to_string())?;
    let ranks = params.ranks();
    for j in 1..=params.order() {
        let inc = &st.c_inv[j] - &st.c_inv[j - 1];
        let ev = sym_eigenvalues(&inc);
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(format!("lag {j}: increment eigenvalue {min}"));
        }
        let positive = ev.iter().filter(|&&e| e > 1e-8).count();
        if positive != ranks[j - 1] {
            return Err(format!("lag {j}: {positive} positive eigenvalues, rank {}", ranks[j - 1]));
        }
        let m = st.u[j - 1].transpose() * &st.c_inv[j - 1] * &st.u[j - 1];
        if ranks[j - 1] > 0 && op_norm(&m) >= 1.0 {
            return Err(format!("lag {j}: ‖UᵀC⁻¹U‖ = {}", op_norm(&m)));
        }
        let g = st.v[j - 1].transpose() * &st.d_inv[j - 1] * &st.v[j - 1];
        let err = (&g - DMatrix::identity(g.nrows(), g.ncols())).amax();
        if err > 1e-9 {
            return Err(format!("lag {j}: VᵀD⁻¹V deviates from I by {err}"));
        }
    }
    Ok(())
}

/// Worst relative slack of each operator-norm comparison, in the order
/// `‖Υ_j⁻¹‖ ≤ ‖C_p⁻¹‖`, `‖D_j⁻¹‖ ≤ ‖C_p⁻¹‖`, `‖Υ_j‖ ≤ ‖Γ(0)‖`, `‖D_j‖ ≤ ‖Γ(0)‖`,
/// over `j ≤ min(p, 4)`. A positive entry is a violation (`lhs / rhs − 1`).
pub fn norm_excess(params: &ReducedRankVarParams) -> Result<[f64; 4], String> {
    let (st, _) = forward_map(params).map_err(|e| e.to_string())?;
    let p = params.order();
    let cp_inv = op_norm(&st.c_inv[p]);
    let g0 = op_norm(&st.gamma[0]);
    let mut worst = [f64::NEG_INFINITY; 4];
    for j in 0..=p.min(4) {
        let ups = st.upsilon(j);
        let ups_inv = ups.clone().try_inverse().ok_or(format!("Υ_{j} singular"))?;
        let vals =
            [op_norm(&ups_inv) / cp_inv, op_norm(&st.d_inv[j]) / cp_inv, op_norm(&ups) / g0, op_norm(&st.d[j]) / g0];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v - 1.0);
        }
    }
    Ok(worst)
}

/// Names of the comparisons reported by [`norm_excess`].
pub const NORM_LABELS: [&str; 4] =
    ["|Ups_j^-1| <= |C_p^-1|", "|D_j^-1| <= |C_p^-1|", "|Ups_j| <= |Gamma(0)|", "|D_j| <= |Gamma(0)|"];

/// `(A, Σ)` → Lyapunov solve → `Γ(0)` equals `Ω⁻¹`.
pub fn check_round_trip(params: &ReducedRankVarParams) -> Result<(), String> {
    let (_, model) = forward_map(params).map_err(|e| e.to_string())?;
    let g0 = solve_stationary_covariance(&model.a, &model.sigma).map_err(|e| e.to_string())?;
    let err = rel_frobenius(&g0, &model.gamma0);
    if err > 1e-8 {
        return Err(format!("round trip error {err}"));
    }
    Ok(())
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov statistic and p-value against `cdf`.
pub fn ks_test(values: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        dmax = dmax.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    (dmax, kolmogorov_q((sn + 0.12 + 0.11 / sn) * dmax))
}

/// Variance of the sample mean of a correlated series by batch means.
pub fn batch_means_var(x: &[f64], batches: usize) -> f64 {
    let b = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / ((batches - 1) * batches) as f64
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Test functions of the prior hierarchy compared by the Geweke test.
pub const GEWEKE_LABELS: [&str; 9] = [
    "log sigma2_e",
    "log xi",
    "log delta_1",
    "log delta_2",
    "log delta_lag_1",
    "log phi_11",
    "log f_1",
    "log e1_21^2",
    "log L_11^2",
];

fn geweke_functions(params: &ReducedRankVarParams, h: &rrvar::priors::HyperState) -> [f64; 9] {
    [
        h.sigma2_e.ln(),
        h.xi.ln(),
        h.delta[0].ln(),
        h.delta[1].ln(),
        h.delta_lag[0][0].ln(),
        h.phi[(0, 0)].ln(),
        params.f[0].ln(),
        params.e1[(1, 0)].powi(2).ln(),
        params.l[0][(0, 0)].powi(2).ln(),
    ]
}

fn draw_given_hyper<R: rand::Rng>(d: usize, h: &rrvar::priors::HyperState, rng: &mut R) -> ReducedRankVarParams {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, h.sigma2_e.sqrt()).unwrap();
    let e1 = DMatrix::from_fn(d, d, |i, j| if i > j { normal.sample(rng) } else { 0.0 });
    let f = rrvar::priors::sample_f(d, h.xi, rng);
    let l = rrvar::priors::sample_factors(d, h, rng);
    let k = l.iter().map(|m| DMatrix::from_element(m.nrows(), m.ncols(), 1.0)).collect();
    ReducedRankVarParams { e1, f, lambda: 0.5, l, k }
}

/// Geweke successive-conditional test of the hyperparameter updates on a
/// `d = 3`, ranks `[2, 1]` hierarchy. Returns one z-score per test function.
pub fn geweke_prior_hierarchy(seed: u64, n_marginal: usize, n_successive: usize) -> Vec<f64> {
    let cfg = rrvar::priors::HyperConfig::default();
    geweke_with(&cfg, &cfg, seed, n_marginal, n_successive)
}

/// As [`geweke_prior_hierarchy`], with the Gibbs sweep run under `update`
/// while the marginal draws use `prior`. Differing configs must be detected.
pub fn geweke_with(
    prior: &rrvar::priors::HyperConfig,
    update: &rrvar::priors::HyperConfig,
    seed: u64,
    n_marginal: usize,
    n_successive: usize,
) -> Vec<f64> {
    use rrvar::priors::{gibbs_update_hypers, HyperState};
    let d = 3;
    let ranks = [2, 1];
    let cfg = prior;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut marginal = vec![Vec::with_capacity(n_marginal); 9];
    for _ in 0..n_marginal {
        let h = HyperState::sample_prior(d, &ranks, cfg, &mut rng);
        let p = draw_given_hyper(d, &h, &mut rng);
        for (m, v) in marginal.iter_mut().zip(geweke_functions(&p, &h)) {
            m.push(v);
        }
    }

    let mut successive = vec![Vec::with_capacity(n_successive); 9];
    let mut h = HyperState::sample_prior(d, &ranks, cfg, &mut rng);
    for _ in 0..n_successive {
        let p = draw_given_hyper(d, &h, &mut rng);
        h = gibbs_update_hypers(&p, &h, update, &mut rng);
        for (s, v) in successive.iter_mut().zip(geweke_functions(&p, &h)) {
            s.push(v);
        }
    }

    marginal
        .iter()
        .zip(&successive)
        .map(|(m, s)| {
            let (mm, mv) = mean_var(m);
            let sm = s.iter().sum::<f64>() / s.len() as f64;
            (sm - mm) / (mv / m.len() as f64 + batch_means_var(s, 100)).sqrt()
        })
        .collect()
}

/// Two-sided Bonferroni critical value at overall level `alpha`.
pub fn bonferroni_z(alpha: f64, k: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / (2.0 * k as f64))
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Frozen random-walk Metropolis on a correlated 2-d Gaussian; KS p-values
/// of the two marginals over `n` thinned draws.
pub fn frozen_gaussian_ks(seed: u64, n: usize, thin: usize) -> [f64; 2] {
    use nalgebra::{DVector, Matrix2};
    use rrvar::sampler::run_adaptive_metropolis;
    use rrvar::McmcConfig;
    let sd = [1.0, 2.0];
    let rho = 0.5;
    let cov = Matrix2::new(sd[0] * sd[0], rho * sd[0] * sd[1], rho * sd[0] * sd[1], sd[1] * sd[1]);
    let prec = cov.try_inverse().unwrap();
    let target = move |x: &DVector<f64>| {
        let v = nalgebra::Vector2::new(x[0], x[1]);
        -0.5 * (v.transpose() * prec * v)[0]
    };
    let cfg = McmcConfig { n_burn: 1000, n_keep: n, thin, freeze_adaptation: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (draws, _) = run_adaptive_metropolis(target, DVector::zeros(2), 2.0, &cfg, &mut rng);
    let mut out = [0.0; 2];
    for c in 0..2 {
        let x: Vec<f64> = draws.iter().map(|v| v[c]).collect();
        out[c] = ks_test(&x, |t| phi(t / sd[c])).1;
    }
    out
}

/// Quarterly ISO date for row `i` starting 2000-01-01.
pub fn quarter(i: usize) -> String {
    format!("{}-{:02}-01", 2000 + i / 4, 1 + 3 * (i % 4))
}

/// Writes a two-group toy panel (levels, 80 quarters, regime switch after
/// row 40) and returns a panel-mode study config pointing at it.
pub fn toy_panel_study(dir: &std::path::Path, seed: u64) -> rrvar::StudyConfig {
    use rrvar::panel::Window;
    use rrvar::study::{PanelConfig, StudyMode};
    let names = ["a1", "a2", "b1", "b2", "b3"];
    let groups = ["alpha", "alpha", "beta", "beta", "beta"];
    let pre = random_case(5, 1, 1, 40, seed).1;
    let post = scaled_case(5, 1, 1, 40, seed + 1).1;
    let mut csv = String::from("date");
    for n in names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    for i in 0..80 {
        let row = if i < 40 { pre.row(i) } else { post.row(i - 40) };
        csv.push_str(&quarter(i));
        for v in row.iter() {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("panel.csv"), csv).unwrap();
    let mut series = String::from("series,tcode,group\n");
    for (n, g) in names.iter().zip(groups) {
        series.push_str(&format!("{n},1,{g}\n"));
    }
    std::fs::write(dir.join("series.csv"), series).unwrap();
    rrvar::StudyConfig {
        mode: StudyMode::Panel,
        seed,
        threads: 1,
        tau: 0.1,
        ridge: 1.0,
        mcmc: rrvar::McmcConfig {
            n_burn: 300,
            n_keep: 200,
            adapt_start: 200,
            prune_iter: 100,
            p_max: 2,
            r_init: 1,
            ..Default::default()
        },
        panel: Some(PanelConfig {
            csv: dir.join("panel.csv"),
            date_column: "date".into(),
            series_file: dir.join("series.csv"),
            pre: Window { start: quarter(0), end: quarter(39) },
            post: Window { start: quarter(40), end: quarter(79) },
            match_length: true,
        }),
        simulation: None,
    }
}

/// Reads a CSV with a header into string records.
pub fn read_records(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
