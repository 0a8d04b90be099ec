//! Experiment runner: config parsing, subcommand dispatch and output files.

pub mod config;
pub mod selftest;

use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::advantage::{self, Estimator};
use crate::efron_stein::{self, DiscreteLVM};
use crate::error::{LcdfError, Result};
use crate::spectral::{self, Corruption, Decision};
use config::{Command, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "lcdf", version, about = "Low coordinate degree advantage experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, env = "LCDF_THREADS")]
    pub threads: Option<usize>,
    /// Output directory for result.json and scan.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &LcdfError) -> i32 {
    match e {
        LcdfError::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Runs the command and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    base_dir: PathBuf,
    seed: Option<u64>,
    out: PathBuf,
}

impl Context {
    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| LcdfError::Validation("a seed is required (config `seed` or --seed)".into()))
    }

    fn write_result(&self, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        std::fs::write(self.out.join("result.json"), s)?;
        Ok(())
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let (cfg, base_dir) = match &cli.config {
        Some(p) => (
            ExperimentConfig::load(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None if cli.command == Command::Selftest => (ExperimentConfig::empty(), PathBuf::new()),
        None => return Err(LcdfError::Validation("--config is required".into())),
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(LcdfError::Validation(format!("config is for {c:?}, not {:?}", cli.command)));
        }
    }
    let threads = cli.threads.or(cfg.threads);
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let ctx = Context {
        seed: cli.seed.or(cfg.seed),
        cfg,
        base_dir,
        out,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(LcdfError::Validation("threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| LcdfError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &ctx))
}

fn dispatch(cmd: Command, ctx: &Context) -> Result<()> {
    match cmd {
        Command::Fisher => fisher(ctx),
        Command::Overlap => overlap(ctx),
        Command::Advantage => advantage_cmd(ctx),
        Command::Exact => exact(ctx),
        Command::Universality => universality(ctx),
        Command::Spectral => spectral_cmd(ctx),
        Command::PhaseDiagram => phase_diagram(ctx),
        Command::Selftest => selftest_cmd(ctx),
    }
}

fn fisher(ctx: &Context) -> Result<()> {
    let ch = ExperimentConfig::require(&ctx.cfg.channel, "channel")?.build()?;
    let f = ch.fisher_information()?;
    let fd = ch.fisher_information_fd_extrapolated(1e-2)?;
    log::info!("F = {f} [fisher_information] for {}", ch.name());
    ctx.write_result(&json!({
        "command": "fisher",
        "channel": ch.name(),
        "F": f,
        "estimator": "fisher_information",
        "finite_difference": { "F": fd, "estimator": "richardson_finite_difference", "h": 1e-2 },
    }))
}

fn overlap(ctx: &Context) -> Result<()> {
    let ch = ExperimentConfig::require(&ctx.cfg.channel, "channel")?.build()?;
    let pts = ExperimentConfig::require(&ctx.cfg.points, "points")?;
    let rows = pts
        .iter()
        .map(|&[x1, x2]| Ok(json!({ "x1": x1, "x2": x2, "R": ch.overlap(x1, x2)?, "estimator": "overlap" })))
        .collect::<Result<Vec<_>>>()?;
    log::info!("{} overlaps [overlap] for {}", rows.len(), ch.name());
    ctx.write_result(&json!({ "command": "overlap", "channel": ch.name(), "overlaps": rows }))
}

fn advantage_cmd(ctx: &Context) -> Result<()> {
    let c = &ctx.cfg;
    let prior = ExperimentConfig::require(&c.prior, "prior")?.build()?;
    let d = *ExperimentConfig::require(&c.degree, "degree")?;
    let trials = *ExperimentConfig::require(&c.trials, "trials")?;
    let seed = ctx.seed()?;
    let est: Estimator = c.estimator.map(Into::into).unwrap_or(Estimator::SubsetFormula);
    let channel = c.channel.as_ref().map(|b| b.build()).transpose()?;
    let need_channel = || {
        channel
            .as_ref()
            .ok_or_else(|| LcdfError::Validation("config is missing `channel`".into()))
    };
    let (r, sigma2) = match est {
        Estimator::SubsetFormula => (advantage::cadv_mc(&prior, need_channel()?, d, trials, seed)?, None),
        Estimator::ExpBound => (advantage::cadv_exp_bound_mc(&prior, need_channel()?, d, trials, seed)?, None),
        Estimator::Univ => {
            let s2 = match c.sigma2 {
                Some(s) => s,
                None => 1.0 / need_channel()?.fisher_information()?,
            };
            (advantage::univ_mc(&prior, s2, d, trials, seed)?, Some(s2))
        }
    };
    log::info!("advantage mean {} +- {} [{:?}]", r.mean, r.std_error, r.estimator);
    if r.unstable {
        log::warn!("heavy-tailed trials: trimmed mean {} vs mean {}", r.trimmed_mean, r.mean);
    }
    ctx.write_result(&json!({
        "command": "advantage",
        "prior": prior.name(),
        "channel": channel.map(|ch| ch.name()),
        "sigma2": sigma2,
        "seed": seed,
        "result": r,
    }))
}

fn exact(ctx: &Context) -> Result<()> {
    let rel = ExperimentConfig::require(&ctx.cfg.model, "model")?;
    let path = if rel.is_absolute() { rel.clone() } else { ctx.base_dir.join(rel) };
    let model = DiscreteLVM::load(&path)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for d in 0..=model.n() {
        let a = efron_stein::cadv_exact(&model, d)?;
        let b = efron_stein::cadv_formula_exact(&model, d)?;
        let rel_diff = (a - b).abs() / a.abs().max(1.0);
        worst = worst.max(rel_diff);
        rows.push(json!({
            "D": d,
            "cadv_exact": a,
            "cadv_formula_exact": b,
            "relative_difference": rel_diff,
            "estimator": "exact_enumeration",
        }));
    }
    let chi2 = efron_stein::chi_squared(&model)?;
    let agree = worst <= EXACT_TOL;
    log::info!("exact dual-path worst relative difference {worst:e} [exact_enumeration]");
    ctx.write_result(&json!({
        "command": "exact",
        "model": path.display().to_string(),
        "N": model.n(),
        "chi_squared": chi2,
        "degrees": rows,
        "max_relative_difference": worst,
        "agree": agree,
    }))?;
    if !agree {
        return Err(LcdfError::Numerical {
            message: "cadv_exact and cadv_formula_exact disagree".into(),
            achieved: worst,
        });
    }
    Ok(())
}

fn universality(ctx: &Context) -> Result<()> {
    let c = &ctx.cfg;
    let prior = ExperimentConfig::require(&c.prior, "prior")?.build()?;
    let ch = ExperimentConfig::require(&c.channel, "channel")?.build()?;
    let d = *ExperimentConfig::require(&c.degree, "degree")?;
    let trials = *ExperimentConfig::require(&c.trials, "trials")?;
    let seed = ctx.seed()?;
    let rep = advantage::universality_report(&prior, &ch, d, trials, seed)?;
    log::info!("cadv / univ_D = {} [paired subset_formula / univ]", rep.ratio_d);
    ctx.write_result(&json!({
        "command": "universality",
        "prior": prior.name(),
        "channel": ch.name(),
        "seed": seed,
        "report": rep,
    }))
}

fn spectral_cmd(ctx: &Context) -> Result<()> {
    let sc = ExperimentConfig::require(&ctx.cfg.spectral, "spectral")?;
    let cfg = sc.build()?;
    let seed = ctx.seed()?;
    if sc.trials == 0 {
        return Err(LcdfError::Validation("trials must be positive".into()));
    }
    let test = cfg.corruption == Corruption::None && cfg.lambda > 0.0;
    let rows: Vec<(f64, Option<f64>, Option<bool>)> = (0..sc.trials)
        .into_par_iter()
        .map(|t| {
            let s = spectral::sample_spiked_matrix_with(&cfg, &mut crate::rng::stream(seed, t as u64))?;
            let m = spectral::statistic_matrix(&cfg, &s);
            let l = spectral::normalized_top_eigenvalue(&m)?;
            let g = sc.trace_power.map(|d| spectral::trace_power_statistic(&m, d)).transpose()?;
            let dec = if test {
                Some(spectral::eigenvalue_test(&s, cfg.lambda, &cfg.density)?.decision == Decision::Planted)
            } else {
                None
            };
            Ok((l, g, dec))
        })
        .collect::<Result<_>>()?;
    let l: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let e = advantage::AdvantageEstimate::from_values(Estimator::Univ, 0, &l);
    let trace = sc.trace_power.map(|d| {
        let g: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
        let e = advantage::AdvantageEstimate::from_values(Estimator::Univ, d, &g);
        json!({ "D": d, "mean": e.mean, "std_error": e.std_error, "estimator": "trace_power" })
    });
    let planted_fraction = test.then(|| rows.iter().filter(|r| r.2 == Some(true)).count() as f64 / rows.len() as f64);
    log::info!("mean lambda_max/sqrt(n) = {} +- {} [top_eigenvalue]", e.mean, e.std_error);
    ctx.write_result(&json!({
        "command": "spectral",
        "n": cfg.n,
        "lambda": cfg.lambda,
        "density": cfg.density.name(),
        "corruption": cfg.corruption,
        "seed": seed,
        "trials": sc.trials,
        "lambda_max_over_sqrt_n": { "mean": e.mean, "std_error": e.std_error, "estimator": "top_eigenvalue" },
        "per_trial": l,
        "trace_power": trace,
        "eigenvalue_test": planted_fraction.map(|f| json!({
            "planted_fraction": f,
            "threshold": spectral::eigenvalue_threshold(cfg.lambda, cfg.density.fisher().unwrap_or(f64::NAN)),
            "estimator": "eigenvalue_test",
        })),
    }))
}

fn phase_diagram(ctx: &Context) -> Result<()> {
    let sc = ExperimentConfig::require(&ctx.cfg.scan, "scan")?;
    let seed = ctx.seed()?;
    let cfg = sc.build(seed)?;
    let scan = spectral::phase_scan(&cfg)?;
    spectral::write_scan_csv(&scan.points, &ctx.out.join("scan.csv"))?;
    if scan.conjecture_probe {
        log::info!("phase scan is a conjecture probe: finite-n evidence only");
    }
    ctx.write_result(&json!({
        "command": "phase-diagram",
        "density": cfg.density.name(),
        "seed": seed,
        "scan": scan,
    }))
}

fn selftest_cmd(ctx: &Context) -> Result<()> {
    let checks = selftest::run();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    ctx.write_result(&json!({
        "command": "selftest",
        "checks": checks,
        "failed": failed,
    }))?;
    if !failed.is_empty() {
        return Err(LcdfError::Numerical {
            message: format!("selftest failures: {}", failed.join(", ")),
            achieved: failed.len() as f64,
        });
    }
    Ok(())
}
