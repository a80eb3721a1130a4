//! `rrvar` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rrvar::edgediff::edge_diff;
use rrvar::likelihood::{loglik_dense_oracle, loglik_rank_one, loglik_recursive, DENSE_ORACLE_LIMIT};
use rrvar::sampler::{read_chain_binary, write_chain_binary, write_chain_csv};
use rrvar::study::{read_sample_csv, write_matrix_csv, write_truth_bundle, SimulationConfig, StudyConfig};
use rrvar::{run_mcmc, run_study, McmcConfig, ReducedRankVarParams};

#[derive(Parser)]
#[command(name = "rrvar", version, about = "Sparse stationary precision estimation for causal VAR models")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent chains.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DrawFormat {
    Binary,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth bundle (truth, adjacency, parameters, sample).
    Simulate {
        #[arg(long, default_value_t = 30)]
        d: usize,
        #[arg(long, default_value_t = 40)]
        t: usize,
        #[arg(long, default_value_t = 0.15)]
        sparsity: f64,
        /// Replicate index, starting at 1.
        #[arg(long, default_value_t = 1)]
        replicate: usize,
    },
    /// Fit the model to a data CSV and write posterior draws.
    Fit {
        /// CSV with a header row; a `date` column is ignored.
        #[arg(long)]
        data: PathBuf,
        /// Fit the data as given instead of centering each column.
        #[arg(long)]
        no_center: bool,
        #[arg(long, value_enum, default_value_t = DrawFormat::Binary)]
        format: DrawFormat,
    },
    /// Edge differences between two binary draw files.
    Diff {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        #[arg(long, default_value = "group")]
        group: String,
    },
    /// Run a panel or simulation study described by `--config`.
    Study,
    /// Evaluate the log-likelihood of a sample three ways.
    LoglikCheck {
        #[arg(long)]
        data: PathBuf,
        /// JSON parameters, either bare or under a `params` key.
        #[arg(long)]
        params: PathBuf,
    },
}

/// Sampler settings file: either a bare table or an `[mcmc]` section.
#[derive(Deserialize)]
struct FitFile {
    mcmc: Option<McmcConfig>,
}

fn load_mcmc(path: Option<&Path>) -> Result<McmcConfig> {
    let Some(path) = path else { return Ok(McmcConfig::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let wrapped: FitFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match wrapped.mcmc {
        Some(m) => Ok(m),
        None => Ok(toml::from_str(&text)?),
    }
}

fn load_params(path: &Path) -> Result<ReducedRankVarParams> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let v = v.get("params").cloned().unwrap_or(v);
    let p: ReducedRankVarParams = serde_json::from_value(v)?;
    p.validate()?;
    Ok(p)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { d, t, sparsity, replicate } => {
            if *replicate == 0 {
                bail!("replicates are numbered from 1");
            }
            let sc = SimulationConfig {
                d: *d,
                t: vec![*t],
                sparsity: vec![*sparsity],
                replicates: *replicate,
                ..Default::default()
            };
            let r = write_truth_bundle(&cli.out, &sc, cli.seed.unwrap_or(1), 0, replicate - 1, *t)?;
            println!("wrote {} (d = {}, T = {})", cli.out.display(), r.sample.dim(), r.sample.len());
        }
        Command::Fit { data, no_center, format } => {
            let mut cfg = load_mcmc(cli.config.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let mut sample = read_sample_csv(data)?;
            if !*no_center {
                sample = rrvar::Sample::centered(sample.data().clone())?;
            }
            let chain = run_mcmc(&sample, &cfg, None)?;
            fs::create_dir_all(&cli.out)?;
            match format {
                DrawFormat::Binary => write_chain_binary(&cli.out.join("draws.bin"), &chain)?,
                DrawFormat::Csv => write_chain_csv(&cli.out.join("draws.csv"), &chain)?,
            }
            write_matrix_csv(&cli.out.join("omega_mean.csv"), &chain.posterior_mean_omega())?;
            let summary = serde_json::json!({
                "config": cfg,
                "draws": chain.len(),
                "pruned_order": chain.pruned_order,
                "acceptance": chain.acceptance.iter().map(|a| serde_json::json!({"block": a.name, "overall": a.overall, "recent": a.recent})).collect::<Vec<_>>(),
                "conditioning_rejections": chain.conditioning_rejections,
                "max_spectral_radius": chain.spectral_radii.iter().copied().fold(0.0, f64::max),
                "lambda_max": chain.hyper_config.lambda_max,
                "warnings": chain.warnings,
            });
            fs::write(cli.out.join("fit.json"), serde_json::to_string_pretty(&summary)?)?;
            for w in &chain.warnings {
                log::warn!("{w}");
            }
            println!("kept {} draws; order {:?}", chain.len(), chain.pruned_order.ranks);
        }
        Command::Diff { pre, post, tau, group } => {
            let a = read_chain_binary(pre)?;
            let b = read_chain_binary(post)?;
            let report = edge_diff(group, &a.omega, &b.omega, *tau)?;
            fs::create_dir_all(&cli.out)?;
            fs::write(cli.out.join("edge_diff.json"), serde_json::to_string_pretty(&report)?)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            println!(
                "{}: {} of {} pairs changed (proportion {}), change score at tau {} = {}",
                report.group,
                report.change_edges.len(),
                report.pairs.len(),
                report.change_proportion,
                report.tau,
                report.change_score_tau
            );
        }
        Command::Study => {
            let path = cli.config.as_deref().context("study needs --config")?;
            let mut cfg = StudyConfig::load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.threads {
                cfg.threads = t;
            }
            let report = run_study(&cfg, &cli.out)?;
            for (job, msg) in &report.errors {
                log::error!("{job}: {msg}");
            }
            println!(
                "study finished: {} groups, {} cases, {} failures; report in {}",
                report.groups.len(),
                report.cases.len(),
                report.errors.len(),
                cli.out.display()
            );
        }
        Command::LoglikCheck { data, params } => {
            let sample = read_sample_csv(data)?;
            let p = load_params(params)?;
            println!("recursive  {}", loglik_recursive(&p, &sample)?);
            if p.ranks().iter().all(|&r| r == 1) {
                println!("rank-one   {}", loglik_rank_one(&p, &sample)?);
            }
            if sample.len() * sample.dim() <= DENSE_ORACLE_LIMIT {
                println!("dense      {}", loglik_dense_oracle(&p, &sample)?);
            } else {
                println!("dense      skipped (T*d above {DENSE_ORACLE_LIMIT})");
            }
        }
    }
    Ok(())
}
