//! Batch driver for the panel change analysis and the simulation study.
//!
//! Every chain gets a seed derived from the study seed and its position in
//! the job list, so reports do not depend on thread scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edgediff::{change_score, edge_diff, EdgeDiffReport};
use crate::error::{Error, Result};
use crate::panel::{ingest, read_series_file, GroupWindows, PanelSpec, Window};
use crate::sampler::{run_mcmc, ChainOutput, McmcConfig};
use crate::simgen::{
    fit_var1_baseline, gen_sparse_precision, mse_precision, naive_precision, roc_points, simulate_var, PrecisionSpec,
};
use crate::varcore::ReducedRankVarParams;

pub const BASELINE_LABEL: &str = "baseline: ridge-VAR(1)";
pub const NAIVE_LABEL: &str = "naive inverse covariance";
pub const PROPOSED_LABEL: &str = "proposed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Panel,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub csv: PathBuf,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    /// CSV with columns `series,tcode,group`.
    pub series_file: PathBuf,
    pub pre: Window,
    pub post: Window,
    #[serde(default = "default_true")]
    pub match_length: bool,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub d: usize,
    pub t: Vec<usize>,
    pub sparsity: Vec<f64>,
    pub replicates: usize,
    pub nei: usize,
    pub rewire: f64,
    pub gwishart_scale: f64,
    pub entry_floor: f64,
    /// Update rank of the fitted model.
    pub rank: usize,
    /// Standard deviation of the true `L_1`, `K_1` entries.
    pub update_sd: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            d: 30,
            t: vec![40, 60],
            sparsity: vec![0.15, 0.25],
            replicates: 10,
            rank: 1,
            nei: 5,
            rewire: 0.05,
            gwishart_scale: 6.0,
            entry_floor: 1.0,
            update_sd: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub mode: StudyMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Ridge penalty of the VAR(1) baseline.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub panel: Option<PanelConfig>,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

fn default_seed() -> u64 {
    1
}

fn default_threads() -> usize {
    1
}

fn default_tau() -> f64 {
    0.1
}

fn default_ridge() -> f64 {
    1.0
}

impl StudyConfig {
    /// Reads a TOML config; relative panel paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: StudyConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.panel.as_mut() {
            if p.csv.is_relative() {
                p.csv = base.join(&p.csv);
            }
            if p.series_file.is_relative() {
                p.series_file = base.join(&p.series_file);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            StudyMode::Panel if self.panel.is_none() => Err(Error::Contract("panel mode needs a [panel] table".into())),
            StudyMode::Simulation if self.simulation.is_none() => {
                Err(Error::Contract("simulation mode needs a [simulation] table".into()))
            }
            _ => self.mcmc.validate(),
        }
    }
}

/// SplitMix64 finalizer applied to the base seed and a job index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// File-name safe version of a label.
pub fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Per-group result of the panel analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: String,
    pub series: Vec<String>,
    pub report: EdgeDiffReport,
    pub baseline_change_score: f64,
    /// Largest companion spectral radius over both chains' retained draws.
    pub max_spectral_radius: f64,
    pub chain_warnings: Vec<String>,
}

/// Median MSE and mean AUC of one method in one simulation case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub median_mse: f64,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: String,
    pub sparsity: f64,
    pub t: usize,
    pub replicates_ok: usize,
    /// Largest companion spectral radius over the proposed method's retained draws.
    pub max_spectral_radius: f64,
    pub methods: Vec<MethodSummary>,
}

impl CaseSummary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub groups: Vec<GroupResult>,
    pub cases: Vec<CaseSummary>,
    /// `(job, message)` for every isolated failure.
    pub errors: Vec<(String, String)>,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Runs the configured study and writes its report files into `out`.
pub fn run_study(cfg: &StudyConfig, out: &Path) -> Result<StudyReport> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let report = match cfg.mode {
        StudyMode::Panel => run_panel(cfg, cfg.panel.as_ref().expect("validated"), out)?,
        StudyMode::Simulation => run_simulation(cfg, cfg.simulation.as_ref().expect("validated"), out)?,
    };
    let mut log = String::new();
    for (job, msg) in &report.errors {
        log.push_str(&format!("{job}: {msg}\n"));
    }
    fs::write(out.join("errors.log"), log)?;
    let manifest = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "groups": report.groups.iter().map(|g| serde_json::json!({
            "group": g.group,
            "series": g.series,
            "draws": g.report.n_draws,
            "max_spectral_radius": g.max_spectral_radius,
            "warnings": g.chain_warnings,
        })).collect::<Vec<_>>(),
        "cases": report.cases,
        "errors": report.errors,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(report)
}

fn run_panel(cfg: &StudyConfig, pc: &PanelConfig, out: &Path) -> Result<StudyReport> {
    let spec = PanelSpec {
        csv_path: pc.csv.clone(),
        date_column: pc.date_column.clone(),
        series: read_series_file(&pc.series_file)?,
        window_pre: pc.pre.clone(),
        window_post: pc.post.clone(),
        match_length: pc.match_length,
        min_length: cfg.mcmc.p_max + 2,
    };
    let groups = ingest(&spec)?;

    let jobs: Vec<(usize, bool)> = (0..groups.len()).flat_map(|g| [(g, false), (g, true)]).collect();
    let chains: Vec<Result<ChainOutput>> = pool(cfg.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(g, post)| {
                let sample = if post { &groups[g].post } else { &groups[g].pre };
                let mcmc =
                    McmcConfig { seed: derive_seed(cfg.seed, (2 * g + usize::from(post)) as u64), ..cfg.mcmc.clone() };
                run_mcmc(sample, &mcmc, None)
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut errors = Vec::new();
    let mut chains = chains.into_iter();
    for gw in &groups {
        let pre = chains.next().expect("two chains per group");
        let post = chains.next().expect("two chains per group");
        match summarize_group(cfg, gw, pre, post) {
            Ok(r) => results.push(r),
            Err(e) => errors.push((gw.group.clone(), e.to_string())),
        }
    }

    fs::create_dir_all(out.join("pairs"))?;
    let mut ta = csv_writer(&out.join("tableA.csv"))?;
    ta.write_record(["group", "d", "n_pairs", "n_changed", "change_proportion"])?;
    let mut tb = csv_writer(&out.join("tableB.csv"))?;
    tb.write_record(["group", "method", "tau", "change_score"])?;
    for r in &results {
        let rep = &r.report;
        ta.write_record([
            r.group.clone(),
            r.series.len().to_string(),
            rep.pairs.len().to_string(),
            rep.change_edges.len().to_string(),
            rep.change_proportion.to_string(),
        ])?;
        tb.write_record([
            r.group.clone(),
            PROPOSED_LABEL.into(),
            rep.tau.to_string(),
            rep.change_score_tau.to_string(),
        ])?;
        tb.write_record([
            r.group.clone(),
            BASELINE_LABEL.into(),
            rep.tau.to_string(),
            r.baseline_change_score.to_string(),
        ])?;
        write_pairs(&out.join("pairs").join(format!("pairs_{}.csv", slug(&r.group))), r)?;
        write_change_graph(&out.join(format!("change_graph_{}.csv", slug(&r.group))), r)?;
    }
    ta.flush()?;
    tb.flush()?;
    Ok(StudyReport { groups: results, cases: Vec::new(), errors })
}

fn summarize_group(
    cfg: &StudyConfig,
    gw: &GroupWindows,
    pre: Result<ChainOutput>,
    post: Result<ChainOutput>,
) -> Result<GroupResult> {
    let pre = pre.map_err(|e| Error::Init(format!("pre-window chain: {e}")))?;
    let post = post.map_err(|e| Error::Init(format!("post-window chain: {e}")))?;
    let report = edge_diff(&gw.group, &pre.omega_draws, &post.omega_draws, cfg.tau)?;
    let base_pre = fit_var1_baseline(&gw.pre, cfg.ridge)?;
    let base_post = fit_var1_baseline(&gw.post, cfg.ridge)?;
    let baseline_change_score = change_score(&base_pre.omega, &base_post.omega, cfg.tau)?;
    let mut chain_warnings: Vec<String> = pre.warnings.iter().map(|w| format!("pre: {w}")).collect();
    chain_warnings.extend(post.warnings.iter().map(|w| format!("post: {w}")));
    chain_warnings.extend(base_pre.warning.iter().map(|w| format!("baseline pre: {w}")));
    chain_warnings.extend(base_post.warning.iter().map(|w| format!("baseline post: {w}")));
    chain_warnings.extend(report.warnings.iter().cloned());
    let max_spectral_radius =
        pre.spectral_radii.iter().chain(&post.spectral_radii).copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GroupResult {
        group: gw.group.clone(),
        series: gw.series.clone(),
        report,
        baseline_change_score,
        max_spectral_radius,
        chain_warnings,
    })
}

/// Columns: `i,j,series_i,series_j,theta_mean,theta_lo,theta_hi,changed,exceeds_tau` (1-based indices).
fn write_pairs(path: &Path, r: &GroupResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["i", "j", "series_i", "series_j", "theta_mean", "theta_lo", "theta_hi", "changed", "exceeds_tau"])?;
    for p in &r.report.pairs {
        w.write_record([
            (p.i + 1).to_string(),
            (p.j + 1).to_string(),
            r.series[p.i].clone(),
            r.series[p.j].clone(),
            p.mean.to_string(),
            p.lo.to_string(),
            p.hi.to_string(),
            u8::from(p.changed).to_string(),
            u8::from(p.exceeds_tau).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Edge list of flagged pairs: `series_i,series_j,theta_mean,theta_lo,theta_hi`.
fn write_change_graph(path: &Path, r: &GroupResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series_i", "series_j", "theta_mean", "theta_lo", "theta_hi"])?;
    for p in r.report.pairs.iter().filter(|p| p.changed) {
        w.write_record([
            r.series[p.i].clone(),
            r.series[p.j].clone(),
            p.mean.to_string(),
            p.lo.to_string(),
            p.hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Seed of the true model for a `(sparsity, replicate)` cell.
pub fn truth_seed(seed: u64, sparsity_idx: usize, rep: usize) -> u64 {
    derive_seed(seed, (1_000_000 * (sparsity_idx + 1) + rep) as u64)
}

/// Truth and data for one simulation replicate.
pub struct Replicate {
    pub omega: DMatrix<f64>,
    pub params: ReducedRankVarParams,
    pub sample: crate::likelihood::Sample,
}

/// Builds one replicate. The truth depends on `(sparsity, replicate)` only,
/// and samples of different lengths share their leading rows.
pub fn simulate_replicate(
    sc: &SimulationConfig,
    seed: u64,
    sparsity_idx: usize,
    rep: usize,
    t: usize,
) -> Result<Replicate> {
    let truth_seed = truth_seed(seed, sparsity_idx, rep);
    let spec = PrecisionSpec {
        d: sc.d,
        sparsity_target: sc.sparsity[sparsity_idx],
        nei: sc.nei,
        q: None,
        rewire: sc.rewire,
        gwishart_scale: sc.gwishart_scale,
        entry_floor: sc.entry_floor,
        seed: truth_seed,
    };
    let truth = gen_sparse_precision(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(truth_seed, 1));
    let n = Normal::new(0.0, sc.update_sd).map_err(|e| Error::Contract(e.to_string()))?;
    // the true lag-1 update is full rank; the fitted rank is `sc.rank`
    let l = DMatrix::from_fn(sc.d, sc.d, |_, _| n.sample(&mut rng));
    let k = DMatrix::from_fn(sc.d, sc.d, |_, _| n.sample(&mut rng));
    let params = ReducedRankVarParams::from_precision(&truth.omega, vec![l], vec![k])?;
    let sample = simulate_var(&params, t, &mut ChaCha8Rng::seed_from_u64(derive_seed(truth_seed, 2)))?;
    Ok(Replicate { omega: truth.omega, params, sample })
}

/// Writes a matrix as a headerless numeric CSV.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("non-numeric cell '{c}' in {}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Input(format!("ragged rows in {}", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes a sample with header `x1,…,xd`.
pub fn write_sample_csv(path: &Path, sample: &crate::likelihood::Sample) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record((1..=sample.dim()).map(|j| format!("x{j}")))?;
    let x = sample.data();
    for t in 0..x.nrows() {
        w.write_record((0..x.ncols()).map(|j| x[(t, j)].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a data CSV with a header row. A column named `date` is ignored;
/// every other column must be numeric.
pub fn read_sample_csv(path: &Path) -> Result<crate::likelihood::Sample> {
    let mut rdr = csv::Reader::from_path(path)?;
    let keep: Vec<usize> = rdr.headers()?.iter().enumerate().filter(|(_, h)| *h != "date").map(|(i, _)| i).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = keep
            .iter()
            .map(|&i| {
                let c = rec.get(i).unwrap_or("").trim();
                c.parse::<f64>().map_err(|_| {
                    Error::Input(format!("non-numeric cell '{c}' at data row {} of {}", line + 1, path.display()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    crate::likelihood::Sample::new(DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i][j]))
}

/// Writes `truth.csv`, `adjacency.csv`, `params.json` and `sample.csv` for one replicate.
pub fn write_truth_bundle(
    dir: &Path,
    sc: &SimulationConfig,
    seed: u64,
    sparsity_idx: usize,
    rep: usize,
    t: usize,
) -> Result<Replicate> {
    fs::create_dir_all(dir)?;
    let r = simulate_replicate(sc, seed, sparsity_idx, rep, t)?;
    write_matrix_csv(&dir.join("truth.csv"), &r.omega)?;
    let adj = DMatrix::from_fn(r.omega.nrows(), r.omega.ncols(), |i, j| {
        f64::from(u8::from(i != j && r.omega[(i, j)] != 0.0))
    });
    write_matrix_csv(&dir.join("adjacency.csv"), &adj)?;
    let params = serde_json::json!({
        "simulation": sc,
        "seed": seed,
        "sparsity": sc.sparsity[sparsity_idx],
        "replicate": rep,
        "t": t,
        "truth_seed": truth_seed(seed, sparsity_idx, rep),
        "params": r.params,
    });
    fs::write(dir.join("params.json"), serde_json::to_string_pretty(&params)?)?;
    write_sample_csv(&dir.join("sample.csv"), &r.sample)?;
    Ok(r)
}

struct RepOutcome {
    mse: [f64; 3],
    auc: [f64; 3],
    max_radius: f64,
    roc: [Vec<(f64, f64)>; 3],
}

const METHODS: [&str; 3] = [PROPOSED_LABEL, BASELINE_LABEL, NAIVE_LABEL];

fn run_replicate(
    cfg: &StudyConfig,
    sc: &SimulationConfig,
    si: usize,
    t: usize,
    rep: usize,
    job: u64,
) -> Result<RepOutcome> {
    let r = simulate_replicate(sc, cfg.seed, si, rep, t)?;
    let mcmc = McmcConfig { seed: derive_seed(cfg.seed, job), r_init: sc.rank, ..cfg.mcmc.clone() };
    let chain = run_mcmc(&r.sample, &mcmc, None)?;
    let base = fit_var1_baseline(&r.sample, cfg.ridge)?;
    let naive = naive_precision(&r.sample).ok();
    let estimates = [Some(chain.posterior_mean_omega()), Some(base.omega.clone()), naive.clone()];
    let scores = [Some(chain.posterior_mean_abs_omega()), Some(base.omega.abs()), naive.map(|m| m.abs())];
    let max_radius = chain.spectral_radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = RepOutcome { mse: [f64::NAN; 3], auc: [f64::NAN; 3], max_radius, roc: Default::default() };
    for m in 0..3 {
        if let Some(est) = &estimates[m] {
            out.mse[m] = mse_precision(est, &r.omega)?;
        }
        if let Some(s) = &scores[m] {
            if let Ok(roc) = roc_points(s, &r.omega) {
                out.auc[m] = roc.auc;
                out.roc[m] = roc.points;
            }
        }
    }
    Ok(out)
}

fn median(v: &[f64]) -> f64 {
    let mut v: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_finite(v: &[f64]) -> f64 {
    let f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if f.is_empty() {
        f64::NAN
    } else {
        f.iter().sum::<f64>() / f.len() as f64
    }
}

/// Case label such as `sp15_T40`.
pub fn case_name(sparsity: f64, t: usize) -> String {
    format!("sp{}_T{t}", (sparsity * 100.0).round() as i64)
}

fn run_simulation(cfg: &StudyConfig, sc: &SimulationConfig, out: &Path) -> Result<StudyReport> {
    let mut jobs = Vec::new();
    for si in 0..sc.sparsity.len() {
        for (ti, &t) in sc.t.iter().enumerate() {
            for rep in 0..sc.replicates {
                let job = ((si * sc.t.len() + ti) * sc.replicates + rep) as u64;
                jobs.push((si, t, rep, job));
            }
        }
    }
    let outcomes: Vec<Result<RepOutcome>> = pool(cfg.threads)?
        .install(|| jobs.par_iter().map(|&(si, t, rep, job)| run_replicate(cfg, sc, si, t, rep, job)).collect());

    let mut errors = Vec::new();
    let mut cases = Vec::new();
    let mut summary = csv_writer(&out.join("summary.csv"))?;
    summary.write_record(["case", "sparsity", "T", "method", "median_mse", "mean_auc", "replicates"])?;
    let mut idx = 0;
    for &sp in &sc.sparsity {
        for &t in &sc.t {
            let case = case_name(sp, t);
            let mut mse_w = csv_writer(&out.join(format!("mse_{case}.csv")))?;
            mse_w.write_record(["replicate", "method", "mse", "auc"])?;
            let mut roc_w = csv_writer(&out.join(format!("roc_{case}.csv")))?;
            roc_w.write_record(["replicate", "method", "fpr", "tpr"])?;
            let mut mse = [Vec::new(), Vec::new(), Vec::new()];
            let mut auc = [Vec::new(), Vec::new(), Vec::new()];
            let mut ok = 0;
            let mut max_radius = f64::NEG_INFINITY;
            for rep in 0..sc.replicates {
                match &outcomes[idx] {
                    Ok(o) => {
                        ok += 1;
                        max_radius = max_radius.max(o.max_radius);
                        for m in 0..3 {
                            mse[m].push(o.mse[m]);
                            auc[m].push(o.auc[m]);
                            mse_w.write_record([
                                (rep + 1).to_string(),
                                METHODS[m].to_string(),
                                o.mse[m].to_string(),
                                o.auc[m].to_string(),
                            ])?;
                            for &(f, tp) in &o.roc[m] {
                                roc_w.write_record([
                                    (rep + 1).to_string(),
                                    METHODS[m].to_string(),
                                    f.to_string(),
                                    tp.to_string(),
                                ])?;
                            }
                        }
                    }
                    Err(e) => errors.push((format!("{case} replicate {}", rep + 1), e.to_string())),
                }
                idx += 1;
            }
            mse_w.flush()?;
            roc_w.flush()?;
            let methods: Vec<MethodSummary> = (0..3)
                .map(|m| MethodSummary {
                    method: METHODS[m].to_string(),
                    median_mse: median(&mse[m]),
                    mean_auc: mean_finite(&auc[m]),
                })
                .collect();
            for m in &methods {
                summary.write_record([
                    case.clone(),
                    sp.to_string(),
                    t.to_string(),
                    m.method.clone(),
                    m.median_mse.to_string(),
                    m.mean_auc.to_string(),
                    ok.to_string(),
                ])?;
            }
            cases.push(CaseSummary {
                case,
                sparsity: sp,
                t,
                replicates_ok: ok,
                max_spectral_radius: max_radius,
                methods,
            });
        }
    }
    summary.flush()?;
    Ok(StudyReport { groups: Vec::new(), cases, errors })
}
