//! `mfaoi` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration error, 3 I/O or
//! table file error, 4 verification failure, 5 solver failure.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfaoi::baselines::{irsa_baseline, irsa_mean_degree, randomized_lp};
use mfaoi::calibration::default_load_grid;
use mfaoi::experiments::export::{baseline_csv, closed_loop_report, equilibrium_export, pareto_csv, BaselineRow};
use mfaoi::experiments::{closed_loop_simulate, default_warmup, log_grid, sweep_eta, verify_suite};
use mfaoi::{calibrate_table, solve_equilibrium, PopulationConfig, SuccessTable, TableError};
use thiserror::Error;

use settings::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("verification failed")]
    Verification,
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Verification => 4,
            Self::Solver(_) => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mfaoi",
    version,
    about = "Mean-field AoI-optimal random access: calibration, equilibria, sweeps"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the success table by Monte Carlo over the load grid.
    Calibrate {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        load_max: Option<f64>,
        #[arg(long)]
        load_step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the equilibrium for one energy multiplier and dump its policy.
    Solve {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the energy multiplier over a log grid and write the tradeoff curve.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eta_min: Option<f64>,
        #[arg(long)]
        eta_max: Option<f64>,
        #[arg(long)]
        eta_points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized and repetition baseline curves.
    Baseline {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        energy_points: Option<usize>,
        /// Degree parameter of a repetition curve; repeat for several.
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop packet-level run of the equilibrium policy.
    Validate {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle checks of the solvers; exits 4 if any check fails.
    Verify {
        #[arg(long, default_value_t = 20)]
        delta_max: u32,
    },
}

/// Overrides of the `[system]` section.
#[derive(Debug, Args)]
struct SystemArgs {
    #[arg(long)]
    n_devices: Option<u32>,
    #[arg(long)]
    pools: Option<u32>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    p_bar: Option<f64>,
    #[arg(long)]
    delta_max: Option<u32>,
    /// Disable small-scale fading.
    #[arg(long)]
    no_fading: bool,
    /// Propagate decoded packets to their replicas in other pools.
    #[arg(long)]
    cross_pool_cancel: bool,
}

impl SystemArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        let sys = &mut s.system;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { sys.$field = v; })* };
        }
        set!(n_devices, pools, noise, p_bar, delta_max);
        if self.no_fading {
            sys.rician_k = None;
        }
        if self.cross_pool_cancel {
            sys.cross_pool_cancel = true;
        }
        sys.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    match cli.command {
        Command::Calibrate {
            system,
            trials,
            load_max,
            load_step,
            out,
        } => {
            system.apply(&mut s)?;
            let c = &mut s.calibration;
            c.trials = trials.unwrap_or(c.trials);
            c.load_max = load_max.unwrap_or(c.load_max);
            c.load_step = load_step.unwrap_or(c.load_step);
            if !(c.load_step > 0.0 && c.load_max >= 0.0) {
                return Err(CliError::Config(
                    "load grid needs load_step > 0 and load_max >= 0".into(),
                ));
            }
            let grid = default_load_grid(c.load_max, c.load_step);
            let table = calibrate_table(&s.system, &grid, c.trials, s.seed).map_err(|e| match e {
                TableError::Io(e) => CliError::Io(e.to_string()),
                other => CliError::Config(other.to_string()),
            })?;
            emit(out.as_deref(), &table.to_csv())
        }
        Command::Solve {
            system,
            table,
            eta,
            out,
        } => {
            system.apply(&mut s)?;
            let (table, pop) = load_inputs(&table, &s)?;
            let eq = solve_equilibrium(eta, &table, &pop, &s.fixed_point, s.system.delta_max)
                .map_err(|e| CliError::Solver(e.to_string()))?;
            if !eq.converged {
                eprintln!("warning: fixed point did not converge at eta={eta}; reporting the best iterate");
            }
            emit(out.as_deref(), &equilibrium_export(&eq, &s.system.digest(), s.seed))
        }
        Command::Sweep {
            system,
            table,
            eta_min,
            eta_max,
            eta_points,
            out,
        } => {
            system.apply(&mut s)?;
            let (table, pop) = load_inputs(&table, &s)?;
            let w = &s.sweep;
            let grid = log_grid(
                eta_min.unwrap_or(w.eta_min),
                eta_max.unwrap_or(w.eta_max),
                eta_points.unwrap_or(w.eta_points),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            let records = sweep_eta(&grid, &table, &pop, &s.fixed_point, s.system.delta_max)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let unconverged = records.iter().filter(|r| !r.converged).count();
            if unconverged > 0 {
                eprintln!("warning: {unconverged} of {} points did not converge", records.len());
            }
            emit(out.as_deref(), &pareto_csv(&records, &s.system.digest(), s.seed))
        }
        Command::Baseline {
            system,
            table,
            energy_points,
            alphas,
            out,
        } => {
            system.apply(&mut s)?;
            let (table, pop) = load_inputs(&table, &s)?;
            let points = energy_points.unwrap_or(s.baseline.energy_points);
            if points < 2 {
                return Err(CliError::Config("energy_points must be at least 2".into()));
            }
            let alphas = if alphas.is_empty() {
                s.baseline.alphas.clone()
            } else {
                alphas
            };
            let spaced = |max: f64| (0..points).map(move |i| max * i as f64 / (points - 1) as f64);
            let max_energy = table.actions.iter().map(|a| a.energy()).max().unwrap_or(0);
            let mut rows = Vec::new();
            for energy in spaced(f64::from(max_energy)) {
                let b = randomized_lp(&table, energy, &pop).map_err(|e| CliError::Solver(e.to_string()))?;
                rows.push(BaselineRow::randomized(&b));
            }
            for &alpha in &alphas {
                for budget in spaced(irsa_mean_degree(alpha)) {
                    let b = irsa_baseline(alpha, budget, &table, &pop).map_err(|e| CliError::Config(e.to_string()))?;
                    rows.push(BaselineRow::irsa(&b));
                }
            }
            emit(
                out.as_deref(),
                &baseline_csv(&rows, s.system.delta_max, &s.system.digest(), s.seed),
            )
        }
        Command::Validate {
            system,
            table,
            eta,
            frames,
            warmup,
            out,
        } => {
            system.apply(&mut s)?;
            let (table, pop) = load_inputs(&table, &s)?;
            let v = &s.validate;
            let eta = eta.unwrap_or(v.eta);
            let frames = frames.unwrap_or(v.frames);
            let warmup = warmup.or(v.warmup).unwrap_or_else(|| default_warmup(frames));
            let eq = solve_equilibrium(eta, &table, &pop, &s.fixed_point, s.system.delta_max)
                .map_err(|e| CliError::Solver(e.to_string()))?;
            if !eq.converged {
                eprintln!("warning: fixed point did not converge at eta={eta}; validating the best iterate");
            }
            let mut res = closed_loop_simulate(&eq.policy, &s.system, frames, warmup, s.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            res.compare(&eq);
            emit(out.as_deref(), &closed_loop_report(&res, &s.system.digest()))
        }
        Command::Verify { delta_max } => {
            if delta_max < 2 {
                return Err(CliError::Usage("--delta-max must be at least 2".into()));
            }
            let report = verify_suite(delta_max, s.seed);
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Verification)
            }
        }
    }
}

/// Reads the success table and checks it was calibrated for this system.
fn load_inputs(path: &Path, s: &Settings) -> Result<(SuccessTable, PopulationConfig), CliError> {
    let table = SuccessTable::load(path).map_err(|e| CliError::Io(format!("table {}: {e}", path.display())))?;
    table
        .check_digest(&s.system)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let pop = PopulationConfig::from_system(&s.system).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((table, pop))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
