//! Command-line front end. [`run`] parses arguments, dispatches one subcommand
//! and returns the process exit code: 0 on success, 1 when a verification check
//! fails, 2 on usage or configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::ensemble::replication_seed;
use crate::error::{OdlError, Result};
use crate::harness::{self, Verification, VerificationReport};
use crate::io;
use crate::model::{simulate_trajectory, Mode, StrideSpec};
use crate::moments::{exact_moments, MomentRequest};
use crate::oracle::exact_distribution;
use crate::params::{ModelParams, Regime};
use crate::theory;

#[derive(Debug, Parser)]
#[command(name = "odl", version, about = "Random-trend adoption process: simulation, exact moments and limit checks")]
pub struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// worker threads, 0 = all cores
    #[arg(long, global = true, env = "ODL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n0: Option<f64>,
    #[arg(long)]
    pub m0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EnsembleArgs {
    /// path length
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub replications: Option<u64>,
    /// comma-separated checkpoint steps
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    /// latent or marginal
    #[arg(long)]
    pub mode: Option<Mode>,
    /// run every check with tolerance 0
    #[arg(long)]
    pub zero_tolerance: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one trajectory as CSV
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        /// number of decisions
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
        /// dense, every:K or geometric:R
        #[arg(long, value_parser = parse_stride)]
        stride: Option<StrideSpec>,
    },
    /// Exact raw moments of N_n
    Moments {
        #[command(flatten)]
        params: ParamArgs,
        /// highest moment order
        #[arg(long, default_value_t = 4)]
        orders: usize,
        /// comma-separated times n
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<u64>>,
    },
    /// Exact distribution of N_n by dynamic programming
    Oracle {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: u64,
    },
    /// Monte Carlo ensemble checked against the limit theory
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: EnsembleArgs,
    },
    /// `verify` over a parameter grid
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: EnsembleArgs,
        /// axis as key=v1,v2,...; keys a, b, alpha, beta, theta; repeat for a product grid
        #[arg(long, required = true)]
        grid: Vec<String>,
    },
}

fn parse_stride(s: &str) -> std::result::Result<StrideSpec, String> {
    if s == "dense" {
        return Ok(StrideSpec::dense());
    }
    let (kind, v) = s.split_once(':').ok_or("expected dense, every:K or geometric:R")?;
    match kind {
        "every" => v
            .parse::<u64>()
            .ok()
            .filter(|&k| k > 0)
            .map(|k| StrideSpec::Every { k })
            .ok_or_else(|| format!("bad step count `{v}`")),
        "geometric" => v
            .parse::<f64>()
            .ok()
            .filter(|&r| r > 1.0)
            .map(|ratio| StrideSpec::Geometric { ratio })
            .ok_or_else(|| format!("ratio must exceed 1, got `{v}`")),
        _ => Err(format!("unknown stride kind `{kind}`")),
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    ChecksFailed,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::ChecksFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn flags_config(cli: &Cli, params: &ParamArgs) -> RunConfig {
    let mut c = RunConfig::default();
    c.params.a = params.a;
    c.params.b = params.b;
    c.params.alpha = params.alpha;
    c.params.beta = params.beta;
    c.params.n0 = params.n0;
    c.params.m0 = params.m0;
    c.run.master_seed = cli.seed;
    c.run.threads = cli.threads;
    c.output.directory = cli.out.clone();
    c
}

fn with_ensemble_flags(mut c: RunConfig, e: &EnsembleArgs) -> RunConfig {
    c.run.horizon = e.horizon;
    c.run.replications = e.replications;
    c.run.checkpoints = e.checkpoints.clone();
    c.run.mode = e.mode;
    if e.zero_tolerance {
        c.tolerance.zero = Some(true);
    }
    c
}

fn resolve(cli: &Cli, flags: RunConfig) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(base.overlay(&flags))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate {
            params,
            steps,
            mode,
            stride,
        } => {
            let mut flags = flags_config(cli, params);
            flags.run.horizon = *steps;
            flags.run.mode = *mode;
            flags.run.stride = stride.clone();
            cmd_simulate(&resolve(cli, flags)?)
        }
        Command::Moments { params, orders, times } => {
            let mut flags = flags_config(cli, params);
            flags.run.checkpoints = times.clone();
            cmd_moments(&resolve(cli, flags)?, *orders)
        }
        Command::Oracle { params, n } => cmd_oracle(&resolve(cli, flags_config(cli, params))?, *n),
        Command::Verify { params, run } => {
            let flags = with_ensemble_flags(flags_config(cli, params), run);
            cmd_verify(&resolve(cli, flags)?)
        }
        Command::Sweep { params, run, grid } => {
            let flags = with_ensemble_flags(flags_config(cli, params), run);
            cmd_sweep(&resolve(cli, flags)?, grid)
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let horizon = cfg.horizon()?;
    let traj = simulate_trajectory(&p, horizon, cfg.seed(), cfg.mode(), cfg.stride()?);
    let dir = cfg.out_dir();
    let path = io::write_with(&dir, "trajectory.csv", |w| traj.write_csv(w))?;
    let last = traj.last();
    println!(
        "{} regime, theta={}: N_{}={} -> {}",
        p.regime,
        p.theta,
        last.step,
        last.count_a,
        path.display()
    );
    Ok(Outcome::Done)
}

pub fn cmd_moments(cfg: &RunConfig, max_order: usize) -> Result<Outcome> {
    let p = cfg.params()?;
    let times = cfg.run.checkpoints.clone().unwrap_or_else(|| vec![0, 1, 10, 100, 1000]);
    let table = exact_moments(&MomentRequest {
        params: p,
        times,
        max_order,
    })?;
    let dir = cfg.out_dir();
    if cfg.wants(Format::Csv) {
        io::write_with(&dir, "moments.csv", |w| table.write_csv(w))?;
    }
    if cfg.wants(Format::Json) {
        io::write_json(&dir, "moments.json", &table)?;
    }
    println!("{} times x {} orders -> {}", table.times.len(), max_order, dir.display());
    Ok(Outcome::Done)
}

pub fn cmd_oracle(cfg: &RunConfig, n: u64) -> Result<Outcome> {
    let p = cfg.params()?;
    let dist = exact_distribution(&p, n)?;
    let dir = cfg.out_dir();
    if cfg.wants(Format::Csv) {
        io::write_with(&dir, "distribution.csv", |w| dist.write_csv(w))?;
    }
    if cfg.wants(Format::Json) {
        io::write_json(&dir, "distribution.json", &dist)?;
    }
    println!(
        "n={n}: mean {:.6}, variance {:.6}, mass {:.3e} off 1 -> {}",
        dist.mean(),
        dist.variance(),
        dist.total_mass() - 1.0,
        dir.display()
    );
    Ok(Outcome::Done)
}

fn verification_for(cfg: &RunConfig, p: &ModelParams) -> Result<Verification> {
    let horizon = cfg.horizon()?;
    let mut req = harness::verification_request(
        p,
        horizon,
        cfg.replications()?,
        cfg.seed(),
        cfg.run.lil_from.unwrap_or(1000.min(horizon / 10)),
        cfg.path_ratio()?,
    )?;
    if let Some(cps) = &cfg.run.checkpoints {
        req.checkpoints = cps.clone();
        req.checkpoints.push(horizon);
    }
    req.mode = cfg.mode();
    req.threads = cfg.threads();
    harness::run_verification(&req, &cfg.tolerances()?)
}

fn write_verification(cfg: &RunConfig, dir: &Path, v: &Verification) -> Result<()> {
    let var = harness::regime_variance(&v.theory);
    if cfg.wants(Format::Json) {
        io::write_json(dir, "report.json", &v.report)?;
        io::write_json(dir, "summary.json", &v.summary)?;
        io::write_json(dir, "theory.json", &v.theory)?;
    }
    if cfg.wants(Format::Csv) {
        io::write_with(dir, "report.csv", |w| io::write_report_csv(&v.report, w))?;
        io::write_with(dir, "checkpoints.csv", |w| io::write_checkpoint_csv(&v.summary, w))?;
        io::write_with(dir, "fluct_hist.csv", |w| {
            io::write_fluct_histogram(&v.summary.final_scaled, var, 40, 4.0, w)
        })?;
        if let Some(ps) = &v.summary.path_stats {
            io::write_with(dir, "asclt_overlay.csv", |w| io::write_asclt_overlay(ps, var, w))?;
        }
        let p = &v.summary.params;
        let trace = harness::cn_trace(
            p,
            v.summary.horizon,
            replication_seed(v.summary.master_seed, 0),
            v.summary.mode,
            1.05,
        );
        let limit = theory::cn_limits(p).map(|c| c.as_limit).unwrap_or(f64::NAN);
        io::write_with(dir, "cn_trace.csv", |w| io::write_cn_trace(&trace, limit, w))?;
    }
    Ok(())
}

fn print_report(r: &VerificationReport) {
    for row in &r.rows {
        let status = match (row.enforced, row.passed) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        println!(
            "{status} {:<18} n={:<8} theory={:<12.6} empirical={:<12.6}",
            row.name, row.n, row.theoretical, row.empirical
        );
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    if r.nothing_verified {
        println!("warning: nothing verified");
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let v = verification_for(cfg, &p)?;
    write_verification(cfg, &cfg.out_dir(), &v)?;
    print_report(&v.report);
    Ok(if v.report.all_passed && !v.report.nothing_verified {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub directory: String,
    pub regime: Regime,
    pub theta: f64,
    pub params: ModelParams,
    pub all_passed: bool,
    pub nothing_verified: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Axis {
    Field(&'static str, Vec<f64>),
    Theta(Vec<f64>),
}

fn parse_axis(spec: &str) -> Result<Axis> {
    let bad = |msg: String| OdlError::Config {
        field: "--grid".into(),
        message: msg,
    };
    let (key, vals) = spec
        .split_once('=')
        .ok_or_else(|| bad(format!("expected key=v1,v2,..., got `{spec}`")))?;
    let values: Vec<f64> = vals
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(bad(format!("axis `{key}` has no values")));
    }
    Ok(match key {
        "a" => Axis::Field("a", values),
        "b" => Axis::Field("b", values),
        "alpha" => Axis::Field("alpha", values),
        "beta" => Axis::Field("beta", values),
        "theta" => Axis::Theta(values),
        other => return Err(bad(format!("unknown axis `{other}`"))),
    })
}

/// Expands the grid into validated parameter sets, first axis outermost.
pub fn sweep_points(base: &RunConfig, grid: &[String]) -> Result<Vec<ModelParams>> {
    let axes: Vec<Axis> = grid.iter().map(|g| parse_axis(g)).collect::<Result<_>>()?;
    let mut points: Vec<(RunConfig, Option<f64>)> = vec![(base.clone(), None)];
    for axis in &axes {
        let mut next = Vec::new();
        for (c, th) in &points {
            match axis {
                Axis::Field(name, values) => {
                    for &v in values {
                        let mut c = c.clone();
                        match *name {
                            "a" => c.params.a = Some(v),
                            "b" => c.params.b = Some(v),
                            "alpha" => c.params.alpha = Some(v),
                            _ => c.params.beta = Some(v),
                        }
                        next.push((c, *th));
                    }
                }
                Axis::Theta(values) => {
                    for &v in values {
                        next.push((c.clone(), Some(v)));
                    }
                }
            }
        }
        points = next;
    }
    points
        .into_iter()
        .map(|(c, th)| match th {
            Some(theta) => {
                let a = c.params.a.ok_or_else(|| OdlError::Config {
                    field: "params.a".into(),
                    message: "missing; a theta axis needs a base `a`".into(),
                })?;
                let (n0, m0) = (c.params.n0.unwrap_or(1.0), c.params.m0.unwrap_or(1.0));
                ModelParams::with_theta(a, theta, n0 as u64, m0 as u64)
            }
            None => c.params(),
        })
        .collect()
}

pub fn cmd_sweep(cfg: &RunConfig, grid: &[String]) -> Result<Outcome> {
    let points = sweep_points(cfg, grid)?;
    let root = cfg.out_dir();
    let mut index = Vec::with_capacity(points.len());
    let mut all_ok = true;
    for (i, p) in points.iter().enumerate() {
        let name = format!("point_{i:03}");
        let v = verification_for(cfg, p)?;
        write_verification(cfg, &root.join(&name), &v)?;
        let ok = v.report.all_passed && !v.report.nothing_verified;
        all_ok &= ok;
        println!(
            "{} {name} {} theta={} ({} rows)",
            if ok { "PASS" } else { "FAIL" },
            p.regime,
            p.theta,
            v.report.rows.len()
        );
        index.push(SweepEntry {
            index: i,
            directory: name,
            regime: p.regime,
            theta: p.theta,
            params: *p,
            all_passed: v.report.all_passed,
            nothing_verified: v.report.nothing_verified,
        });
    }
    io::write_json(&root, "index.json", &index)?;
    Ok(if all_ok { Outcome::Done } else { Outcome::ChecksFailed })
}
