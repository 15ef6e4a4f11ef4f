//! Command-line driver: `run`, `sweep` and `verify`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bounds::{self, BoundReport, LinearFit};
use crate::codes;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::propagate::{evolve, TrajectoryResult};
use crate::verify;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

pub const TRAJECTORY_COLUMNS: [&str; 9] = [
    "t",
    "p_perp",
    "rate_total",
    "rate_diag",
    "rate_offdiag",
    "coherence_norm",
    "codespace_leakage",
    "trace_error",
    "min_eig",
];

#[derive(Debug, Parser)]
#[command(name = "penalty-aqc", version, about = "Encoded open-system annealing with energy penalties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one configuration; writes `<prefix>_trajectory.csv` and `<prefix>_bounds.csv`.
    Run { config: PathBuf },
    /// Re-run a configuration over one axis; writes `<prefix>_sweep_<axis>.csv`.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values (at least two).
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Run the invariant checks, optionally on the instance of a config file.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "eta_p")]
    EtaP,
    #[value(name = "t_f")]
    TF,
    #[value(name = "v")]
    V,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::EtaP => "eta_p",
            Axis::TF => "t_f",
            Axis::V => "v",
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// One finished run with its bound report.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: TrajectoryResult,
    pub report: BoundReport,
}

pub fn simulate(cfg: &RunConfig) -> Result<RunOutput> {
    let model = cfg.model()?;
    let bath = cfg.bath()?;
    let trajectory = evolve(&model, &bath, None, &cfg.integrator)?;
    let report = bounds::bound_report(&trajectory, &bath, cfg.eta_p, codes::penalty_gap(model.code()))?;
    Ok(RunOutput { trajectory, report })
}

pub fn write_trajectory(path: &Path, traj: &TrajectoryResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_COLUMNS)?;
    for i in 0..traj.len() {
        let row = [
            traj.times[i],
            traj.p_perp[i],
            traj.rate_total[i],
            traj.rate_diag[i],
            traj.rate_offdiag[i],
            traj.coherence_norm[i],
            traj.codespace_leakage[i],
            traj.trace_error[i],
            traj.min_eig[i],
        ];
        w.write_record(row.iter().map(|x| fmt(*x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds(path: &Path, report: &BoundReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BoundReport::COLUMNS)?;
    w.write_record(report.values().iter().map(|x| fmt(*x)))?;
    w.flush()?;
    Ok(())
}

fn output_path(cfg: &RunConfig, suffix: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.join(format!("{}_{suffix}.csv", cfg.prefix)))
}

pub fn run(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let out = simulate(cfg)?;
    let traj_path = output_path(cfg, "trajectory")?;
    let bounds_path = output_path(cfg, "bounds")?;
    write_trajectory(&traj_path, &out.trajectory)?;
    write_bounds(&bounds_path, &out.report)?;
    Ok((traj_path, bounds_path))
}

/// Per-value rows, in the order given, and the fit for the axis.
#[derive(Debug)]
pub struct SweepOutput {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub reports: Vec<BoundReport>,
    pub final_coherence: Vec<f64>,
    /// Closed-system `p_⊥(t_f)` used as the fit floor on the `eta_p` axis.
    pub floor: Option<f64>,
    pub fit: Option<Result<LinearFit>>,
}

pub fn sweep(cfg: &RunConfig, axis: Axis, values: &[f64], exec: Execution) -> Result<SweepOutput> {
    if values.len() < 2 {
        return Err(Error::config("--values", "a sweep needs at least two values"));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| cfg.with_axis(axis.name(), v))
        .collect::<Result<_>>()?;
    let runs = exec.try_map(&configs, simulate)?;
    let reports: Vec<BoundReport> = runs.iter().map(|r| r.report).collect();
    let final_coherence: Vec<f64> = runs
        .iter()
        .map(|r| r.trajectory.coherence_norm.last().copied().unwrap_or(0.0))
        .collect();
    let (floor, fit) = match axis {
        Axis::EtaP => {
            let mut closed = configs[0].clone();
            closed.kappa = 0.0;
            let floor = simulate(&closed)?.report.p_perp_measured;
            let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.eta_p, r.p_perp_measured)).collect();
            (Some(floor), Some(bounds::eta_scaling_fit(&pts, floor)))
        }
        Axis::TF => {
            let pts: Vec<(f64, f64)> = values.iter().copied().zip(final_coherence.iter().copied()).collect();
            (None, Some(bounds::power_law_fit(&pts)))
        }
        Axis::V => (None, None),
    };
    Ok(SweepOutput {
        axis,
        values: values.to_vec(),
        reports,
        final_coherence,
        floor,
        fit,
    })
}

pub fn write_sweep(path: &Path, out: &SweepOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["row", "axis_value"];
    header.extend(BoundReport::COLUMNS);
    header.extend(["final_coherence", "floor", "slope", "intercept", "r2", "fit_points"]);
    w.write_record(&header)?;
    let floor = out.floor.map(fmt).unwrap_or_default();
    for ((v, r), c) in out.values.iter().zip(&out.reports).zip(&out.final_coherence) {
        let mut row = vec!["point".to_string(), fmt(*v)];
        row.extend(r.values().iter().map(|x| fmt(*x)));
        row.extend([fmt(*c), floor.clone(), String::new(), String::new(), String::new(), String::new()]);
        w.write_record(&row)?;
    }
    let mut summary = vec!["summary".to_string(), String::new()];
    summary.extend(BoundReport::COLUMNS.iter().map(|_| String::new()));
    summary.push(String::new());
    summary.push(floor);
    match &out.fit {
        Some(Ok(f)) => summary.extend([fmt(f.slope), fmt(f.intercept), fmt(f.r2), f.points.to_string()]),
        _ => summary.extend([String::new(), String::new(), String::new(), "0".to_string()]),
    }
    w.write_record(&summary)?;
    w.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn verify_command(config: Option<&Path>, out: &mut dyn Write) -> Result<bool> {
    let cfg = match config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    let report = verify::run_checks(&cfg, None)?;
    for c in &report.checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{status}  {:<40} violation {:.3e} (tol {:.1e})", c.name, c.violation, c.tolerance)?;
    }
    Ok(report.all_passed())
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config } => {
            let result = RunConfig::from_path(&config).and_then(|cfg| run(&cfg));
            match result {
                Ok((t, b)) => {
                    println!("wrote {}", t.display());
                    println!("wrote {}", b.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, axis, values } => {
            let result = RunConfig::from_path(&config).and_then(|cfg| {
                let out = sweep(&cfg, axis, &values, Execution::default())?;
                let path = output_path(&cfg, &format!("sweep_{}", axis.name()))?;
                write_sweep(&path, &out)?;
                Ok((path, out))
            });
            match result {
                Ok((path, out)) => {
                    println!("wrote {}", path.display());
                    match out.fit {
                        Some(Ok(f)) => {
                            println!("fit over {} points: slope {:.6} r2 {:.6}", f.points, f.slope, f.r2);
                            ExitCode::SUCCESS
                        }
                        Some(Err(e)) => fail(e),
                        None => ExitCode::SUCCESS,
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { config } => match verify_command(config.as_deref(), &mut std::io::stdout()) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_VERIFY),
            Err(e) => fail(e),
        },
    }
}
