//! Batch runner behind the `fracflow` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{header_lines, json_artifact, IntegrandChoice, RunConfig};
use crate::dynsys::{check_cocycle, usc_probe};
use crate::error::{Error, Result};
use crate::fracint::{pathwise_integral, HsMatrix, IntegrandPath, Scheme};
use crate::paths::{
    fmt17, holder_seminorm_full, sample_fbm_1d, sample_qfbm, sup_norm, Driver, SampledPath,
};
use crate::solver::{solve_mild, smoothing_profile, translate_check};
use crate::verify::verify_all;

#[derive(Debug, Parser)]
#[command(name = "fracflow", version, about = "Pathwise mild solutions driven by fractional Brownian motion")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use n = 2^k time steps.
    #[arg(long, global = true)]
    pub grid_pow: Option<u32>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Sample a Q-fractional Brownian path.
    SamplePath,
    /// Pathwise integral of a scalar integrand against a scalar fBm.
    Integrate,
    /// Solve the heat problem and write every fixed point found.
    Solve,
    /// Check the strict cocycle property at the configured (t, s) pairs.
    Cocycle,
    /// Upper-semicontinuity probe over decreasing radii.
    Usc,
    /// Run every property check and write a pass/fail report.
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SamplePath => "sample-path",
            Command::Integrate => "integrate",
            Command::Solve => "solve",
            Command::Cocycle => "cocycle",
            Command::Usc => "usc",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(k) = common.grid_pow {
        if !(1..=20).contains(&k) {
            return Err(Error::Config(format!("grid-pow must lie in 1..=20, got {k}")));
        }
        cfg.grid.n_steps = 1 << k;
    }
    cfg.validate()?;
    cfg.build_problem().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_path(dir: &Path, name: &str, path: &SampledPath, cfg: &RunConfig, kind: &str) -> Result<()> {
    let file = fs::File::create(dir.join(name))?;
    path.write_csv(std::io::BufWriter::new(file), &header_lines(cfg, kind))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, cfg: &RunConfig, kind: &str, report: &T) -> Result<()> {
    write(dir, name, &json_artifact(cfg, kind, report)?)
}

fn heat_driver(cfg: &RunConfig) -> Result<Driver> {
    let spec = cfg.build_problem()?;
    let q = sample_qfbm(&spec.operator, cfg.params.hurst, spec.n_steps, spec.dt(), cfg.seed)?;
    Driver::new(q.path)
}

fn sample_path(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let spec = cfg.build_problem()?;
    let q = sample_qfbm(&spec.operator, cfg.params.hurst, spec.n_steps, spec.dt(), cfg.seed)?;
    write_path(dir, "path.csv", &q.path, cfg, "sample-path")?;
    let summary = json!({
        "n_steps": spec.n_steps,
        "n_modes": spec.n_modes(),
        "hurst": cfg.params.hurst,
        "degenerate": q.degenerate,
        "sup_norm": sup_norm(&q.path),
        "holder_seminorm_beta_prime": holder_seminorm_full(&q.path, cfg.params.beta_prime),
        "path_file": "path.csv",
    });
    write_json(dir, "sample_path.json", cfg, "sample-path", &summary)
}

fn integrate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let n = cfg.grid.n_steps;
    let dt = cfg.dt();
    let w = sample_fbm_1d(cfg.params.hurst, n, dt, cfg.seed)?;
    let ic = &cfg.integrate;
    let g: Vec<f64> = match ic.integrand {
        IntegrandChoice::Path => w.scalar_values(),
        IntegrandChoice::Time => (0..=n).map(|k| k as f64 * dt).collect(),
        IntegrandChoice::Constant => vec![ic.constant; n + 1],
    };
    let gp = IntegrandPath::new(0.0, dt, g.iter().map(|v| HsMatrix::scalar(*v)).collect())?;
    let (s, t) = (ic.s, ic.t);
    let moment = pathwise_integral(&gp, &w, &cfg.params, s, t, Scheme::MomentAssembly)?[0];
    let collapsed = pathwise_integral(&gp, &w, &cfg.params, s, t, Scheme::Collapsed)?[0];
    let (ws, wt) = (w.value(w.index_of(s)?)[0], w.value(w.index_of(t)?)[0]);
    let reference = match ic.integrand {
        IntegrandChoice::Path => Some(0.5 * (wt * wt - ws * ws)),
        IntegrandChoice::Constant => Some(ic.constant * (wt - ws)),
        IntegrandChoice::Time => None,
    };
    write_path(dir, "driver.csv", &w, cfg, "integrate")?;
    let report = json!({
        "s": s,
        "t": t,
        "moment_assembly": moment,
        "collapsed": collapsed,
        "scheme_difference": (moment - collapsed).abs(),
        "closed_form": reference,
        "closed_form_error": reference.map(|r| (moment - r).abs()),
    });
    write_json(dir, "integrate.json", cfg, "integrate", &report)
}

fn solve(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let spec = cfg.build_problem()?;
    let u0 = cfg.initial_value();
    let drv = heat_driver(cfg)?;
    let rep = solve_mild(&u0, drv.path(), &spec, &cfg.solver)?;
    write_path(dir, "driver.csv", drv.path(), cfg, "solve")?;
    let mut files = Vec::new();
    for (i, u) in rep.solutions.elements.iter().enumerate() {
        let name = format!("solution_{i}.csv");
        write_path(dir, &name, u, cfg, "solve")?;
        files.push(name);
    }
    let first = &rep.solutions.elements[0];
    let smoothing = smoothing_profile(first, drv.path(), &spec, 0.4)?;
    let translate = translate_check(first, spec.n_steps / 2, &drv, &spec, rep.rho)?;
    let constants = spec.spot_check(cfg.seed, 100);
    let report = json!({
        "rho": rep.rho,
        "rho_trace": rep.rho_trace,
        "contraction_factor": rep.contraction_factor,
        "max_residual_ratio": rep.max_residual_ratio,
        "residual_traces": rep.residual_traces,
        "converged_starts": rep.converged_starts,
        "n_solutions": rep.solutions.len(),
        "residuals": rep.solutions.residuals,
        "provenance": rep.solutions.provenance,
        "weighted_norms": rep.weighted_norms,
        "ball_radius": rep.ball_radius,
        "in_ball": rep.in_ball,
        "smoothing_delta": smoothing.delta,
        "smoothing_constant": smoothing.measured_c,
        "translate_half_residual": translate.residual,
        "constant_check": constants,
        "solution_files": files,
    });
    write_json(dir, "solve.json", cfg, "solve", &report)
}

fn cocycle(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let spec = cfg.build_problem()?;
    let u0 = cfg.initial_value();
    let drv = heat_driver(cfg)?;
    let rows = cfg
        .cocycle
        .pairs
        .iter()
        .map(|[t, s]| check_cocycle(*t, *s, &drv, &u0, &spec, &cfg.solver))
        .collect::<Result<Vec<_>>>()?;
    write_json(dir, "cocycle.json", cfg, "cocycle", &rows)
}

fn usc(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let spec = cfg.build_problem()?;
    let u0 = cfg.initial_value();
    let drv = heat_driver(cfg)?;
    let u = &cfg.usc;
    let rep = usc_probe(u.t, drv.path(), &u0, &spec, &cfg.solver, &u.radii, u.m_per_radius, u.perturb_driver, cfg.seed)?;
    let mut csv_text: String = header_lines(cfg, "usc").iter().map(|l| format!("# {l}\n")).collect();
    csv_text.push_str("radius,excess\n");
    for row in &rep.rows {
        csv_text.push_str(&format!("{},{}\n", fmt17(row.radius), fmt17(row.excess)));
    }
    write(dir, "usc.csv", &csv_text)?;
    write_json(dir, "usc.json", cfg, "usc", &rep)
}

fn verify(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (report, timings) = verify_all(cfg)?;
    for c in &report.checks {
        println!("[{}] {:>2} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name);
    }
    write_json(dir, "verify.json", cfg, "verify-all", &report)?;
    write_json(dir, "timings.json", cfg, "verify-all", &timings)
}

/// Runs one subcommand; the error tells the caller which exit code applies.
pub fn run(command: Command, cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir)?;
    match command {
        Command::SamplePath => sample_path(cfg, &dir),
        Command::Integrate => integrate(cfg, &dir),
        Command::Solve => solve(cfg, &dir),
        Command::Cocycle => cocycle(cfg, &dir),
        Command::Usc => usc(cfg, &dir),
        Command::VerifyAll => verify(cfg, &dir),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::NonConvergence { .. } | Error::NoContraction { .. } => 3,
        _ => 1,
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    let cfg = match resolve_config(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fracflow: {e}");
            return ExitCode::from(2);
        }
    };
    log::info!("{} with config {}", cli.command.name(), cfg.hash());
    match run(cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracflow {}: {e}", cli.command.name());
            if let Error::NonConvergence { residual_traces, .. } = &e {
                for (i, t) in residual_traces.iter().enumerate() {
                    eprintln!("  start {i}: last residual {:e} after {} iterations", t.last().copied().unwrap_or(f64::NAN), t.len());
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
