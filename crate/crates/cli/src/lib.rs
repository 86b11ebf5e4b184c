//! Command-line front end for the `chiral-ring` simulator.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chiral_ring::model::{self, normalize_phase};
use chiral_ring::observables::PointResult;
use chiral_ring::sweep::{compare_sweeps, run_sweep, solve_point, Solver, SweepResult};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use crate::config::{key_help, Format, RunConfig};
use crate::error::CliError;

/// Absolute current agreement expected between the rates and nullspace
/// solvers, as a fraction of 2J_0/N.
pub const SOLVER_AGREEMENT_FRACTION: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "chiral-ring", version, about = "Steady-state current of a driven-dissipative qubit ring")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the device parameters against the model hierarchy.
    Validate,
    /// Solve one (ω_d, φ) point.
    Point {
        /// Drive frequency in 2π·GHz [default: drive.omega_d].
        #[arg(long, allow_hyphen_values = true)]
        omega_d: Option<f64>,
        /// Coupler phase in rad [default: drive.phi].
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        /// rates | nullspace | analytic [default: sweep.solver].
        #[arg(long)]
        solver: Option<Solver>,
        /// Print only the JSON record.
        #[arg(long)]
        json: bool,
    },
    /// Run the (ω_d, φ) sweep and write CSV or JSON.
    Sweep {
        /// Output file [default: output.path].
        #[arg(long)]
        out: Option<PathBuf>,
        /// [default: output.format]
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// [default: sweep.solver]
        #[arg(long)]
        solver: Option<Solver>,
        /// Worker threads [default: sweep.threads].
        #[arg(long)]
        threads: Option<usize>,
        /// Exit 3 when any cell fails.
        #[arg(long)]
        strict: bool,
    },
    /// Write a matplotlib script rendering a sweep CSV.
    PlotScript {
        /// Sweep CSV.
        sweep: PathBuf,
        /// Script path.
        #[arg(long, default_value = "plot_sweep.py")]
        out: PathBuf,
    },
    /// Compare the current signs of two sweep CSVs on the same grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Absolute |current| floor in 2π·GHz [default: 1% of 2J_0/N].
        #[arg(long)]
        floor: Option<f64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

/// The clap command with the configuration key table in `--help`.
pub fn command() -> clap::Command {
    Cli::command().after_help(key_help())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    match &cli.command {
        Command::Validate => cmd_validate(&cfg, out),
        Command::Point {
            omega_d,
            phi,
            solver,
            json,
        } => cmd_point(&cfg, *omega_d, *phi, *solver, *json, out),
        Command::Sweep {
            out: path,
            format,
            solver,
            threads,
            strict,
        } => cmd_sweep(&cfg, path.as_deref(), *format, *solver, *threads, *strict, out),
        Command::PlotScript { sweep, out: path } => cmd_plot_script(&cfg, sweep, path, out),
        Command::Compare { a, b, floor, json } => cmd_compare(&cfg, a, b, *floor, *json, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(e.to_string())
}

pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = model::validate(&cfg.device)?;
    cfg.drive.validate()?;
    write!(out, "{report}").map_err(io_err)?;
    let verdict = if report.all_pass() { "ok" } else { "ok with warnings" };
    writeln!(out, "{verdict}").map_err(io_err)?;
    Ok(0)
}

#[derive(Serialize)]
struct PointRecord<'a> {
    #[serde(flatten)]
    point: &'a PointResult,
    /// Absolute current tolerance for cross-solver agreement, 2π·GHz.
    tolerance: f64,
}

pub fn cmd_point(
    cfg: &RunConfig,
    omega_d: Option<f64>,
    phi: Option<f64>,
    solver: Option<Solver>,
    json: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut drive = cfg.drive;
    if let Some(w) = omega_d {
        drive.omega_d = w;
    }
    if let Some(p) = phi {
        drive.phi = normalize_phase(p);
    }
    model::validate(&cfg.device)?;
    drive.validate()?;
    let solver = solver.unwrap_or(cfg.sweep.solver);
    let point = solve_point(&cfg.device, &drive, solver)?;
    let record = PointRecord {
        point: &point,
        tolerance: SOLVER_AGREEMENT_FRACTION * cfg.device.current_scale(),
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Input(e.to_string()))?;
    if !json {
        let d = &point.diagnostics;
        writeln!(out, "solver           {solver}").map_err(io_err)?;
        writeln!(out, "omega_d          {:.12} 2π·GHz", point.omega_d).map_err(io_err)?;
        writeln!(out, "phi              {:.12} rad", point.phi).map_err(io_err)?;
        writeln!(out, "current          {:.6e} 2π·GHz", point.current_natural).map_err(io_err)?;
        writeln!(out, "current          {:.6e} 1/s", point.current_si).map_err(io_err)?;
        writeln!(out, "n_ground         {:.6e}", point.populations.ground).map_err(io_err)?;
        for (k, n) in point.populations.n_k.iter().enumerate() {
            writeln!(out, "n_k{k:<13} {n:.6e}").map_err(io_err)?;
        }
        writeln!(out, "trace_err        {:.3e}", d.trace_error).map_err(io_err)?;
        writeln!(out, "hermiticity_err  {:.3e}", d.hermiticity_error).map_err(io_err)?;
        writeln!(out, "min_eigenvalue   {:.3e}", d.min_eigenvalue).map_err(io_err)?;
        writeln!(out, "residual         {:.3e}", d.residual).map_err(io_err)?;
        writeln!(out, "bond_spread      {:.3e}", d.bond_spread).map_err(io_err)?;
        writeln!(out, "tolerance        {:.3e}", record.tolerance).map_err(io_err)?;
    }
    writeln!(out, "{text}").map_err(io_err)?;
    Ok(0)
}

pub fn write_sweep(result: &SweepResult, path: &Path, format: Format, digits: usize) -> Result<(), CliError> {
    let cannot = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(cannot)?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Csv => output::write_csv(result, digits, &mut w)?,
        Format::Json => {
            let text = output::json_string(result, digits)?;
            w.write_all(text.as_bytes()).map_err(cannot)?;
            w.write_all(b"\n").map_err(cannot)?;
        }
    }
    w.flush().map_err(cannot)
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    path: Option<&Path>,
    format: Option<Format>,
    solver: Option<Solver>,
    threads: Option<usize>,
    strict: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    model::validate(&cfg.device)?;
    let mut spec = cfg.sweep_spec();
    if let Some(s) = solver {
        spec.solver = s;
    }
    if threads.is_some() {
        spec.workers = threads;
    }
    spec.validate()?;
    let path = path.unwrap_or(&cfg.output.path);
    let format = format.unwrap_or(cfg.output.format);
    let result = run_sweep(&spec)?;
    write_sweep(&result, path, format, cfg.output.precision)?;
    let failures = result.failures();
    writeln!(
        out,
        "wrote {} ({}x{} cells, solver {}, {failures} failed, {:.2} s)",
        path.display(),
        result.phi.len(),
        result.omega_d.len(),
        spec.solver,
        result.metadata.wall_time_s
    )
    .map_err(io_err)?;
    if strict && failures > 0 {
        return Err(CliError::Solver(format!("{failures} sweep cells failed")));
    }
    Ok(0)
}

fn read_table(path: &Path) -> Result<output::SweepTable, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    output::read_csv(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn cmd_plot_script(cfg: &RunConfig, sweep: &Path, path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let table = read_table(sweep)?;
    let mut device = cfg.device.clone();
    device.n_sites = table.n_sites;
    let image = sweep.with_extension("png");
    let script = plot::plot_script(&sweep.to_string_lossy(), &device, cfg.drive.eps_d, &image.to_string_lossy());
    std::fs::write(path, script).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    Ok(0)
}

pub fn cmd_compare(
    cfg: &RunConfig,
    a: &Path,
    b: &Path,
    floor: Option<f64>,
    json: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let load = |p: &Path| -> Result<SweepResult, CliError> {
        read_table(p)?.to_sweep_result(&cfg.device, cfg.drive.eps_d, cfg.sweep.solver)
    };
    let report = compare_sweeps(&load(a)?, &load(b)?, floor)?;
    if json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(out, "{text}").map_err(io_err)?;
        return Ok(0);
    }
    writeln!(out, "sign agreement   {:.4}", report.agreement).map_err(io_err)?;
    writeln!(out, "compared cells   {}", report.compared).map_err(io_err)?;
    writeln!(out, "masked cells     {} (floor {:.3e})", report.masked, report.floor).map_err(io_err)?;
    writeln!(out, "failed cells     {}", report.failed).map_err(io_err)?;
    for c in &report.clusters {
        writeln!(
            out,
            "cluster of {:>4} cells: phi [{:.4}, {:.4}], omega_d [{:.6}, {:.6}]",
            c.cells.len(),
            c.phi_range.0,
            c.phi_range.1,
            c.omega_d_range.0,
            c.omega_d_range.1
        )
        .map_err(io_err)?;
    }
    Ok(0)
}
