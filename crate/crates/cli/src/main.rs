//! `qmas`: single closed-loop runs, Monte Carlo batches and bound reports.
//!
//! Exit status: 0 on success, 1 on invalid input or I/O failure, 2 when the
//! numerics fail (non-finite state).

mod config;
mod plot;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmas_core::{
    consensus_bound, formation_bound, run, run_batch_with_threads, GraphKind, McSummary, SlackCheck,
};
use serde::Serialize;

use config::{AgentCount, Command, FileConfig, Overrides, ResolvedRun};

pub const THREADS_ENV: &str = "QMAS_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qmas_core::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qmas",
    version,
    about = "Quantized multi-agent consensus and formation control"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one consensus simulation.
    Consensus(Flags),
    /// Run one distance-based formation simulation.
    Formation(Flags),
    /// Run a Monte Carlo batch and report the error envelope.
    Montecarlo(Flags),
    /// Print the practical-stability constants as JSON.
    Bound(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// quantized|continuous for single runs, consensus|formation for batches.
    #[arg(long)]
    mode: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed (master seed for batches).
    #[arg(long)]
    seed: Option<u64>,
    /// Agent count, or LO-HI for batches.
    #[arg(long)]
    agents: Option<AgentCount>,
    /// ring, complete or triangulated_polygon.
    #[arg(long, value_parser = parse_topology)]
    topology: Option<GraphKind>,
    /// Euler step [s].
    #[arg(long)]
    step: Option<f64>,
    /// Simulated time [s].
    #[arg(long)]
    horizon: Option<f64>,
    /// Sum of the triangle scales over all agents.
    #[arg(long)]
    delta_total: Option<f64>,
    /// Half-width of the uniform jitter on the initial circle.
    #[arg(long)]
    perturbation: Option<f64>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_topology(s: &str) -> Result<GraphKind, String> {
    match s.replace('-', "_").as_str() {
        "ring" => Ok(GraphKind::Ring),
        "complete" => Ok(GraphKind::Complete),
        "triangulated_polygon" => Ok(GraphKind::TriangulatedPolygon),
        _ => Err(format!("unknown topology `{s}`")),
    }
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            mode: self.mode.clone(),
            samples: self.samples,
            seed: self.seed,
            agents: self.agents,
            topology: self.topology,
            step: self.step,
            horizon: self.horizon,
            delta_total: self.delta_total,
            perturbation: self.perturbation,
        }
    }

    fn resolve(&self, cmd: Command) -> Result<FileConfig, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        file.overlay(&self.overrides(), cmd)
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    command: &'static str,
    config: &'a ResolvedRun,
    delta: f64,
    /// Practical-stability radius of the tracked norm; null for
    /// continuous runs and degenerate formation shapes.
    bound: Option<f64>,
    lambda2: f64,
    spectral_bound: f64,
    final_time: f64,
    final_z_norm: f64,
    final_e_norm: Option<f64>,
    steady_state_error: f64,
    within_bound: Option<bool>,
    terminated_stationary: bool,
    records: usize,
    slack: Option<SlackCheck>,
}

#[derive(Serialize)]
struct BatchOutput<'a> {
    command: &'static str,
    #[serde(flatten)]
    summary: &'a McSummary,
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    text.into_bytes()
}

fn single_run(flags: &Flags, cmd: Command) -> Result<(), CliError> {
    let resolved = config::resolve_run(&flags.resolve(cmd)?, cmd)?;
    prepare_out(&flags.out)?;
    let sim = &resolved.sim;
    let traj = run(sim)?;

    let delta = consensus_bound(&sim.sets);
    let bound = match (&sim.spec, sim.mode.is_quantized()) {
        (_, false) => None,
        (Some(spec), true) => formation_bound(&sim.sets, spec).ok().map(|b| b.bound),
        (None, true) => Some(delta),
    };
    let lambda2 = sim.graph.algebraic_connectivity();
    let summary = RunSummary {
        command: cmd.name(),
        config: &resolved,
        delta,
        bound,
        lambda2,
        spectral_bound: delta / lambda2.sqrt(),
        final_time: *traj.times.last().expect("runs record at least once"),
        final_z_norm: *traj.z_norms.last().expect("runs record at least once"),
        final_e_norm: traj.e_norms.as_ref().and_then(|e| e.last().copied()),
        steady_state_error: traj.steady_state_error,
        within_bound: bound.map(|b| traj.steady_state_error < b),
        terminated_stationary: traj.terminated_stationary,
        records: traj.times.len(),
        slack: traj.slack,
    };

    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    write_file(&flags.out, "trajectory.csv", &csv)?;
    write_file(&flags.out, "summary.json", &to_json(&summary))?;
    let label = if sim.mode.is_formation() {
        "‖e‖"
    } else {
        "‖z‖"
    };
    let title = format!(
        "{} ({} agents, seed {})",
        sim.mode,
        sim.graph.n_agents(),
        resolved.seed
    );
    let svg = plot::series(&title, label, &traj.times, traj.tracked(), bound);
    write_file(&flags.out, "trajectory.svg", svg.as_bytes())
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            CliError::Invalid(format!(
                "{THREADS_ENV} must be a nonnegative integer, got `{v}`"
            ))
        }),
        _ => Ok(0),
    }
}

fn montecarlo(flags: &Flags) -> Result<(), CliError> {
    let mc = config::resolve_batch(&flags.resolve(Command::Montecarlo)?)?;
    let threads = threads_from_env()?;
    prepare_out(&flags.out)?;
    let summary = run_batch_with_threads(&mc, threads)?;

    let mut csv = Vec::new();
    summary.write_csv(&mut csv).expect("writing to memory");
    write_file(&flags.out, "envelope.csv", &csv)?;
    let output = BatchOutput {
        command: Command::Montecarlo.name(),
        summary: &summary,
    };
    write_file(&flags.out, "summary.json", &to_json(&output))?;

    let env = plot::Envelope {
        times: &summary.times,
        lower: &summary.lower95,
        upper: &summary.upper95,
        min: &summary.minimum,
        max: &summary.maximum,
        mean: &summary.mean,
    };
    let label = if mc.mode.is_formation() {
        "‖e‖"
    } else {
        "‖z‖"
    };
    let title = format!(
        "{} samples, {} agents {}-{}, seed {}",
        mc.samples, mc.mode, mc.agent_range[0], mc.agent_range[1], mc.master_seed
    );
    let svg = plot::envelope(&title, label, &env, summary.bound);
    write_file(&flags.out, "envelope.svg", svg.as_bytes())
}

fn bound(flags: &Flags) -> Result<(), CliError> {
    let report = config::resolve_bound(&flags.resolve(Command::Bound)?)?;
    print!(
        "{}",
        String::from_utf8(to_json(&report)).expect("JSON is UTF-8")
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Cmd::Consensus(flags) => single_run(flags, Command::Consensus),
        Cmd::Formation(flags) => single_run(flags, Command::Formation),
        Cmd::Montecarlo(flags) => montecarlo(flags),
        Cmd::Bound(flags) => bound(flags),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("qmas: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmas: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
