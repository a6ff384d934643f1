//! Command implementations behind the `persuade` binary.

pub mod config;
pub mod verify;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use persuade_core::closed_forms::expected_exit_time;
use persuade_core::dynamics::{
    hitting_stats, linear_grid, residual_curve, simulate_exit, upper_exit_probability, write_outcomes_csv,
};
use persuade_core::solver::{solve_sender, sweep_convexity, sweep_snr, write_sweep_csv, SolveResult};
use persuade_core::Error;
use serde::Serialize;

use crate::config::Config;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_COST: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

/// Points in the residual curve written to the simulation summary.
pub const RESIDUAL_GRID_POINTS: usize = 50;

/// A failure with its process exit code. Displays as one `ERR:` line.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn simulation(message: impl Into<String>) -> Self {
        Self { code: EXIT_SIMULATION, message: message.into() }
    }

    pub fn cost(message: impl Into<String>) -> Self {
        Self { code: EXIT_COST, message: message.into() }
    }

    pub fn verify(message: impl Into<String>) -> Self {
        Self { code: EXIT_VERIFY, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.code {
            EXIT_CONFIG => "config",
            EXIT_SIMULATION => "simulation",
            EXIT_COST => "cost_model",
            EXIT_VERIFY => "verification",
            _ => "internal",
        };
        // keep the reason on a single line
        write!(f, "ERR: {kind}: {}", self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

/// Maps library errors raised while running a command.
fn from_core(e: Error) -> CliError {
    match e {
        Error::Censored { .. } => CliError::simulation(e.to_string()),
        Error::InvalidCost(_) => CliError::cost(e.to_string()),
        Error::InvalidParams(_)
        | Error::InvalidLaw(_)
        | Error::InvalidGarbling(_)
        | Error::InvalidConfig(_)
        | Error::InvalidInterval(_)
        | Error::Divergent(_)
        | Error::InvalidArgument(_) => CliError::config(e.to_string()),
        Error::EmptySamples => CliError::simulation(e.to_string()),
    }
}

fn prepare_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
pub struct ResidualSummary {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub completed: usize,
    pub censored: usize,
    pub lower: f64,
    pub upper: f64,
    pub mean_tau: f64,
    pub std_err: f64,
    pub upper_hit_fraction: f64,
    pub upper_hit_std_err: f64,
    pub expected_upper_fraction: f64,
    /// Closed-form mean exit time; only meaningful without garbling.
    pub closed_form_mean_tau: Option<f64>,
    pub residual_curve: ResidualSummary,
}

/// Artifacts written by one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// `simulate`: exit times from the configured interval, written to
/// `paths.csv`, with `summary.json` alongside.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<Artifacts, CliError> {
    let cfg = Config::load(config_path)?;
    let model = cfg.model()?;
    let sim = cfg.sim(seed_override)?;
    let garbling = cfg.garbling()?;
    let (lower, upper) = cfg.interval(&model)?;

    let outcomes = simulate_exit(&model, lower, upper, &garbling, &sim).map_err(from_core)?;
    let stats = hitting_stats(&outcomes, upper).map_err(from_core)?;
    let max_tau = stats.samples.iter().copied().fold(0.0, f64::max);
    let t = linear_grid(max_tau, RESIDUAL_GRID_POINTS);
    let r = residual_curve(&stats, &t).map_err(from_core)?;
    let summary = SimulationSummary {
        n_paths: sim.n_paths,
        completed: outcomes.len(),
        censored: sim.n_paths - outcomes.len(),
        lower,
        upper,
        mean_tau: stats.mean,
        std_err: stats.std_err,
        upper_hit_fraction: stats.success_fraction(),
        upper_hit_std_err: stats.success_std_err(),
        expected_upper_fraction: upper_exit_probability(model.p0(), lower, upper),
        closed_form_mean_tau: if garbling.is_none() {
            expected_exit_time(model.p0(), lower, upper, &model).ok()
        } else {
            None
        },
        residual_curve: ResidualSummary { t, r },
    };

    prepare_out_dir(out_dir)?;
    let csv_path = out_dir.join("paths.csv");
    let mut w = create(&csv_path)?;
    write_outcomes_csv(&mut w, &outcomes)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&csv_path, e))?;
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(Artifacts { files: vec![csv_path, summary_path] })
}

/// `solve`: the sender's optimum, written to `solve.json`.
pub fn cmd_solve(config_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<SolveResult, CliError> {
    let cfg = Config::load(config_path)?;
    let model = cfg.model()?;
    let cost = cfg.cost()?;
    let solve_cfg = cfg.solve(seed_override)?;
    let result = solve_sender(&cost, &model, &solve_cfg).map_err(from_core)?;
    prepare_out_dir(out_dir)?;
    write_json(&out_dir.join("solve.json"), &result)?;
    Ok(result)
}

fn write_sweep(path: &Path, rows: &[(f64, SolveResult)]) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_sweep_csv(&mut w, rows).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// `sweep-convexity`: adds each `sweep.weights` entry times `t²` to the cost
/// and writes `sweep_convexity.csv`.
pub fn cmd_sweep_convexity(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<(f64, SolveResult)>, CliError> {
    let cfg = Config::load(config_path)?;
    let model = cfg.model()?;
    let cost = cfg.cost()?;
    let solve_cfg = cfg.solve(seed_override)?;
    let weights = cfg.sweep()?.weights.ok_or_else(|| CliError::config("sweep.weights is required"))?;
    let rows = sweep_convexity(&cost, &weights, &model, &solve_cfg).map_err(from_core)?;
    prepare_out_dir(out_dir)?;
    write_sweep(&out_dir.join("sweep_convexity.csv"), &rows)?;
    Ok(rows)
}

/// `sweep-snr`: solves at each `sweep.kappas` signal-to-noise ratio and
/// writes `sweep_snr.csv`.
pub fn cmd_sweep_snr(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<(f64, SolveResult)>, CliError> {
    let cfg = Config::load(config_path)?;
    let model = cfg.model()?;
    let cost = cfg.cost()?;
    let solve_cfg = cfg.solve(seed_override)?;
    let kappas = cfg.sweep()?.kappas.ok_or_else(|| CliError::config("sweep.kappas is required"))?;
    let rows = sweep_snr(&cost, &kappas, &model, &solve_cfg).map_err(from_core)?;
    prepare_out_dir(out_dir)?;
    write_sweep(&out_dir.join("sweep_snr.csv"), &rows)?;
    Ok(rows)
}

/// `verify <suite>`: runs a built-in suite and prints one line per check.
/// Fails with exit code 5 if any check fails.
pub fn cmd_verify<W: Write>(suite: &str, seed_override: Option<u64>, out: &mut W) -> Result<Vec<verify::Check>, CliError> {
    let suite: verify::Suite = suite.parse()?;
    let checks = verify::run_suite(suite, seed_override.unwrap_or(verify::DEFAULT_SEED))?;
    for check in &checks {
        writeln!(out, "{check}").map_err(|e| CliError::config(format!("cannot write report: {e}")))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::verify(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(checks)
}
