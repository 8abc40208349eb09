//! `cim`: command-line runner for measurement-feedback coherent Ising machine experiments.

mod config;
mod error;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cim_core::ising::{self, IsingProblem, SpinConfiguration, TemperingOptions};
use cim_core::sampling::{self, EnsembleConfig, RecordOptions, ScalingConfig, TrajectoryRecord};
use cim_core::{LevelSet, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{ProblemSource, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "cim", version, about = "Discrete-time Gaussian-state MFB-CIM sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random SK1 instance.
    #[command(name = "generate-sk1")]
    GenerateSk1 {
        /// Number of spins.
        #[arg(long)]
        n: usize,
        #[arg(long, env = "CIM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the lowest energy levels of a problem.
    Enumerate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Method::Brute)]
        method: Method,
        /// Seed of the tempering oracle.
        #[arg(long, env = "CIM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        replicas: usize,
        #[arg(long, default_value_t = 100_000)]
        sweeps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trajectory ensemble and report sampling metrics.
    Sample(RunArgs),
    /// Sweep feedback gain and pump over a grid.
    Scan(RunArgs),
    /// Median sampling times versus problem size over random SK1 instances.
    Scaling(RunArgs),
    /// Run trajectories and dump their raw records.
    Simulate(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Brute,
    Pt,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gaussian,
    Coherent,
    Meanfield,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Gaussian => Mode::Gaussian,
            ModeArg::Coherent => Mode::Coherent,
            ModeArg::Meanfield => Mode::Meanfield,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem JSON file; overrides the config.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Number of trajectories.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Roundtrips per trajectory.
    #[arg(long)]
    roundtrips: Option<u64>,
    /// Master seed; overrides the config.
    #[arg(long, env = "CIM_SEED")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV path for per-roundtrip records.
    #[arg(long)]
    emit_trajectory: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = Some(ProblemSource::Path(absolute(p)));
        }
        if let Some(n) = self.trajectories {
            cfg.n_traj = Some(n);
        }
        if let Some(t) = self.roundtrips {
            cfg.t_sim = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.params.mode = m.into();
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(absolute(o));
        }
        if let Some(e) = &self.emit_trajectory {
            cfg.emit_trajectory = Some(absolute(e));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Report envelope carrying the resolved configuration for provenance.
#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    command: &'a str,
    run_config: &'a RunConfig,
    #[serde(flatten)]
    result: &'a T,
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn emit_report<T: Serialize>(command: &str, cfg: &RunConfig, result: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&Output { command, run_config: cfg, result }).expect("report serializes");
    emit(cfg.out.as_deref(), &text)
}

fn run_record(problem: &IsingProblem, cfg: &RunConfig, index: u64, energies: bool) -> Result<TrajectoryRecord, CliError> {
    let opts = RecordOptions { raw: true, energies };
    Ok(sampling::run_trajectory(problem, &cfg.params, cfg.seed, index, cfg.t_sim(), opts)?)
}

/// Streams every trajectory of the ensemble to CSV, one at a time.
fn write_trajectories(path: &Path, problem: &IsingProblem, cfg: &RunConfig, n_traj: usize) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    for l in 0..n_traj as u64 {
        let rec = run_record(problem, cfg, l, false)?;
        let mut buf = Vec::new();
        sampling::write_trajectory_csv(&mut buf, &[(l, &rec)])?;
        // the header is written once
        let body = if l == 0 { &buf[..] } else { &buf[buf.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1)..] };
        out.write_all(body)?;
    }
    out.flush()?;
    Ok(())
}

fn ensemble_config(cfg: &RunConfig) -> EnsembleConfig {
    EnsembleConfig { n_traj: cfg.n_traj(), t_sim: cfg.t_sim(), seed: cfg.seed, workers: cfg.workers }
}

fn cmd_generate(n: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let p = ising::generate_sk1(n, seed)?;
    emit(out, &p.to_json())
}

fn cmd_enumerate(problem: &Path, levels: usize, method: Method, opts: TemperingOptions, out: Option<&Path>) -> Result<(), CliError> {
    let p = IsingProblem::from_json(&config::read(problem)?).map_err(|e| CliError::Config(format!("{}: {e}", problem.display())))?;
    let set: LevelSet = match method {
        Method::Brute => ising::enumerate_brute_force(&p, levels)?,
        Method::Pt => ising::enumerate_parallel_tempering(&p, levels, &opts)?,
    };
    emit(out, &set.to_json())
}

fn cmd_sample(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let problem = cfg.load_problem()?;
    let targets = cfg.load_targets(&problem)?;
    let report = sampling::run_ensemble(&problem, &cfg.params, &targets, &ensemble_config(&cfg))?;
    if let Some(path) = &cfg.emit_trajectory {
        write_trajectories(path, &problem, &cfg, cfg.n_traj())?;
    }
    emit_report("sample", &cfg, &report)
}

fn cmd_scan(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let grid = cfg.scan.clone().ok_or_else(|| CliError::Config("scan needs a `scan` grid in the config".into()))?;
    let problem = cfg.load_problem()?;
    let targets = cfg.load_targets(&problem)?;
    let report = sampling::parameter_scan(&problem, &grid.alpha_fb, &grid.pump_r, &cfg.params, &targets, &ensemble_config(&cfg))?;
    emit_report("scan", &cfg, &report)
}

fn cmd_scaling(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let spec = cfg.scaling.clone().ok_or_else(|| CliError::Config("scaling needs a `scaling` section in the config".into()))?;
    let study = ScalingConfig {
        sizes: spec.sizes,
        instances: spec.instances,
        t_sim: args.roundtrips.or(spec.t_sim),
        max_traj: args.trajectories.unwrap_or(spec.max_traj),
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let report = sampling::scaling_study(&cfg.params, &study)?;
    emit_report("scaling", &cfg, &report)
}

#[derive(Serialize)]
struct TrajectorySummary {
    index: u64,
    params: cim_core::UserParams,
    roundtrips: usize,
    overflowed: bool,
    final_config: Option<SpinConfiguration>,
    final_energy: Option<f64>,
    lowest_energy: Option<f64>,
}

#[derive(Serialize)]
struct SimulateReport {
    trajectories: Vec<TrajectorySummary>,
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = args.resolve()?;
    if args.trajectories.is_none() && cfg.n_traj.is_none() {
        cfg.n_traj = Some(1);
    }
    let problem = cfg.load_problem()?;
    let mut summaries = Vec::new();
    for l in 0..cfg.n_traj() as u64 {
        let rec = run_record(&problem, &cfg, l, true)?;
        let energies = rec.energies.clone().unwrap_or_default();
        let last = rec.roundtrips();
        summaries.push(TrajectorySummary {
            index: l,
            params: rec.params,
            roundtrips: last,
            overflowed: rec.overflowed,
            final_config: (last > 0).then(|| rec.config_at(last)),
            final_energy: energies.last().copied(),
            lowest_energy: energies.iter().copied().reduce(f64::min),
        });
    }
    if let Some(path) = &cfg.emit_trajectory {
        write_trajectories(path, &problem, &cfg, cfg.n_traj())?;
    }
    emit_report("simulate", &cfg, &SimulateReport { trajectories: summaries })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateSk1 { n, seed, out } => cmd_generate(n, seed, out.as_deref()),
        Command::Enumerate { problem, levels, method, seed, replicas, sweeps, out } => {
            let opts = TemperingOptions { replicas, sweeps, seed, ..Default::default() };
            cmd_enumerate(&problem, levels, method, opts, out.as_deref())
        }
        Command::Sample(a) => cmd_sample(&a),
        Command::Scan(a) => cmd_scan(&a),
        Command::Scaling(a) => cmd_scaling(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
