//! Batch runner for apprenticeship-learning experiments.
//!
//! Exit codes: 0 converged, 1 bad config or failed run, 2 iteration cap
//! reached, 3 IO failure.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use apprentice_core::apprentice::{run_apprenticeship, ApprenticeError, Mode, RunResult};
use apprentice_core::diagnostics::theorem1_iterations;
use apprentice_core::environments::random_weights;
use apprentice_core::quantum_cost::{crossover_sweep, subroutine_costs, write_crossover_csv};
use apprentice_core::rng::substream;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{effective_seed, env_with_k, load, CostConfig, ExpertConfig, RunConfig, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Run(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "apprentice", version, about = "Apprenticeship learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the apprenticeship loop once.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
        /// Fill the wallclock_ms column of iterations.csv.
        #[arg(long)]
        timings: bool,
    },
    /// Re-run an experiment over a grid of (epsilon, epsilon_rl, k).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
    },
    /// Ideal-mode run with per-iteration contraction certificates.
    Diag {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
    },
    /// Classical versus quantum cost report and crossover table.
    Cost {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
    },
}

/// Parses `argv` (program name first) and runs the command.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run { config, out, timings } => cmd_run(&config, &out, timings, false),
        Command::Diag { config, out } => cmd_run(&config, &out, true, true),
        Command::Sweep { config, out } => cmd_sweep(&config, &out),
        Command::Cost { params, out } => cmd_cost(&params, &out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn create_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

#[derive(Serialize)]
struct Timings {
    setup_ms: f64,
    run_ms: f64,
    write_ms: f64,
}

#[derive(Serialize)]
struct RunLog<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    seed: u64,
    seed_source: &'static str,
    exit_code: i32,
    summary: Summary,
    result: &'a RunResult,
    timings: Timings,
}

#[derive(Serialize)]
struct Summary {
    status: String,
    iterations: usize,
    i_min: usize,
    dist_min: f64,
    threshold: f64,
    t_final: f64,
    theorem1_bound: Option<f64>,
    n_max: usize,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn cmd_run(config_path: &Path, out: &Path, timings: bool, diag: bool) -> Result<i32, CliError> {
    let start = Instant::now();
    let mut config: RunConfig = load(config_path)?;
    if diag {
        config.learner.mode = Mode::Ideal;
    }
    let (seed, seed_source) = effective_seed(config.seed)?;
    let learner = config.learner.to_core(seed)?;
    let problem = config.problem(&base_dir(config_path), seed)?;
    let setup_ms = ms(start);

    let run_start = Instant::now();
    let (result, code) = match run_apprenticeship(&learner, &problem) {
        Ok(r) => (r, EXIT_OK),
        Err(ApprenticeError::MaxIterations { partial }) => {
            eprintln!("iteration cap of {} reached", learner.max_iterations);
            (*partial, EXIT_MAX_ITERATIONS)
        }
        Err(ApprenticeError::Config { field, message }) => {
            return Err(CliError::Config(format!("learner.{field}: {message}")))
        }
        Err(e @ ApprenticeError::Subroutine { .. }) => return Err(CliError::Run(e.to_string())),
    };
    let run_ms = ms(run_start);

    let write_start = Instant::now();
    create_out(out)?;
    if diag {
        output::write_file(&out.join("diag.csv"), |w| output::diag_csv(&result, w))?;
    } else {
        output::write_file(&out.join("iterations.csv"), |w| {
            output::iterations_csv(&result, timings, w)
        })?;
    }
    let mut log = RunLog {
        version: env!("CARGO_PKG_VERSION"),
        command: if diag { "diag" } else { "run" },
        config: &config,
        seed,
        seed_source,
        exit_code: code,
        summary: Summary {
            status: format!("{:?}", result.status).to_lowercase(),
            iterations: result.iterations,
            i_min: result.i_min,
            dist_min: result.dist_min,
            threshold: result.threshold,
            t_final: result.t_final,
            theorem1_bound: result.theorem1_bound,
            n_max: result.n_max,
        },
        result: &result,
        timings: Timings {
            setup_ms,
            run_ms,
            write_ms: 0.0,
        },
    };
    log.timings.write_ms = ms(write_start);
    output::write_json(&out.join("run.json"), &log)?;
    println!(
        "{}: {} after {} iterations, dist_min {:?} (threshold {:?})",
        log.command, log.summary.status, result.iterations, result.dist_min, result.threshold
    );
    Ok(code)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    epsilon: f64,
    epsilon_rl: f64,
    k: usize,
    status: String,
    iterations: Option<usize>,
    dist_min: Option<f64>,
    threshold: Option<f64>,
    theorem1_bound: Option<f64>,
}

fn cmd_sweep(config_path: &Path, out: &Path) -> Result<i32, CliError> {
    let sweep: SweepConfig = load(config_path)?;
    let (seed, _) = effective_seed(sweep.base.seed)?;
    let dir = base_dir(config_path);
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &k in &sweep.grid.k {
        let env = env_with_k(&sweep.base.env, k)?;
        for &epsilon in &sweep.grid.epsilon {
            for &epsilon_rl in &sweep.grid.epsilon_rl {
                cell += 1;
                let mut run = sweep.base.clone();
                run.env = env.clone();
                run.learner.epsilon = epsilon;
                run.learner.epsilon_rl = epsilon_rl;
                // weights of the wrong length are redrawn per cell
                if let ExpertConfig::Optimal { hidden_w: Some(w), .. } = &mut run.expert {
                    if w.len() != k {
                        *w = random_weights(k, 1.0, &mut substream(seed, cell));
                    }
                }
                let bound = theorem1_iterations(k, gamma_of(&run), epsilon, epsilon_rl)
                    .ok()
                    .map(|b| b.iterations);
                let mut row = SweepRow {
                    epsilon,
                    epsilon_rl,
                    k,
                    status: String::new(),
                    iterations: None,
                    dist_min: None,
                    threshold: None,
                    theorem1_bound: bound,
                };
                let learner = match run.learner.to_core(seed) {
                    Ok(l) => l,
                    Err(e) => {
                        eprintln!("skipping cell eps={epsilon} eps_rl={epsilon_rl} k={k}: {e}");
                        row.status = "invalid_config".into();
                        rows.push(row);
                        continue;
                    }
                };
                let problem = run.problem(&dir, seed)?;
                let result = match run_apprenticeship(&learner, &problem) {
                    Ok(r) => r,
                    Err(ApprenticeError::MaxIterations { partial }) => *partial,
                    Err(e) => return Err(CliError::Run(e.to_string())),
                };
                row.status = format!("{:?}", result.status).to_lowercase();
                row.iterations = Some(result.iterations);
                row.dist_min = Some(result.dist_min);
                row.threshold = Some(result.threshold);
                rows.push(row);
            }
        }
    }
    create_out(out)?;
    output::write_file(&out.join("sweep.csv"), |w| output::sweep_csv(&rows, w))?;
    println!(
        "sweep: {} cells written to {}",
        rows.len(),
        out.join("sweep.csv").display()
    );
    Ok(EXIT_OK)
}

fn gamma_of(run: &RunConfig) -> f64 {
    match &run.env {
        config::EnvConfig::Gridworld { gamma, .. } | config::EnvConfig::Random { gamma, .. } => *gamma,
        config::EnvConfig::File { .. } => 0.0,
    }
}

fn cmd_cost(params_path: &Path, out: &Path) -> Result<i32, CliError> {
    let cfg: CostConfig = load(params_path)?;
    let report = subroutine_costs(&cfg.params).map_err(|e| CliError::Config(format!("params: {e}")))?;
    let rows = crossover_sweep(&cfg.grid).map_err(|e| CliError::Config(format!("grid: {e}")))?;
    create_out(out)?;
    output::write_json(&out.join("cost_report.json"), &report)?;
    output::write_file(&out.join("crossover.csv"), |w| write_crossover_csv(&rows, w))?;
    println!(
        "cost: classical {:?}, quantum {:?} per iteration; {} crossover rows",
        report.classical_iteration,
        report.quantum_iteration,
        rows.len()
    );
    Ok(EXIT_OK)
}
