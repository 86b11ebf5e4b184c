//! Steady-state maps over a (ω_d, φ) grid.
//!
//! Cells are independent; with the `parallel` feature they are mapped on a
//! rayon pool and collected by index, so the result does not depend on the
//! worker count.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{omega_d_bar, validate, DeviceParams, DriveParams, DEFAULT_EPS_D};
use crate::observables::{
    current_from_populations, current_operator_expectation, current_per_second, populations_nk, Diagnostics,
    PointResult, Populations,
};
use crate::operators::build_h_sigma;
use crate::rates::{dissipative_jumps, pump_rate_analytic, pump_rates_with, transition_strengths};
use crate::spectrum::diagonalize;
use crate::steadystate::{
    full_liouvillian, rate_equation_residual, stationary_distribution, steady_state_nullspace, total_rates,
    DensityMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Secular rate equations in the eigenbasis of H_σ.
    Rates,
    /// Null space of the full Liouvillian.
    Nullspace,
    /// Independent Lorentzian pumping of each |k⟩ with saturation.
    Analytic,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::Rates => "rates",
            Solver::Nullspace => "nullspace",
            Solver::Analytic => "analytic",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(Solver::Rates),
            "nullspace" => Ok(Solver::Nullspace),
            "analytic" => Ok(Solver::Analytic),
            other => Err(Error::ConfigError(format!(
                "unknown solver `{other}` (expected rates, nullspace or analytic)"
            ))),
        }
    }
}

/// Evenly spaced values from `lo` to `hi`, both included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo, hi, steps }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::ConfigError(format!("{name}: steps must be >= 2, got {}", self.steps)));
        }
        if !self.lo.is_finite() || !self.hi.is_finite() || !(self.lo < self.hi) {
            return Err(Error::ConfigError(format!(
                "{name}: need finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

/// Default ω_d window half-width in units of J_0.
pub const DEFAULT_WINDOW_J0: f64 = 4.0;
pub const DEFAULT_OMEGA_STEPS: usize = 101;
pub const DEFAULT_PHI_STEPS: usize = 121;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub device: DeviceParams,
    pub eps_d: f64,
    pub omega_d: Axis,
    /// φ axis; the closed default [0, 2π] puts every multiple of π/N on the
    /// grid for N = 3. Values are reduced into [0, 2π) before solving.
    pub phi: Axis,
    pub solver: Solver,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SweepSpec {
    /// ω̄_d ± 4J_0 with 101 points, φ over [0, 2π] with 121 points.
    pub fn default_for(device: DeviceParams, eps_d: f64) -> Self {
        let center = omega_d_bar(&device, eps_d);
        let half = DEFAULT_WINDOW_J0 * device.j0;
        Self {
            omega_d: Axis::new(center - half, center + half, DEFAULT_OMEGA_STEPS),
            phi: Axis::new(0.0, 2.0 * std::f64::consts::PI, DEFAULT_PHI_STEPS),
            device,
            eps_d,
            solver: Solver::Rates,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.omega_d.validate("omega_d")?;
        self.phi.validate("phi")?;
        validate(&self.device).map_err(|e| Error::ConfigError(e.to_string()))?;
        if !self.eps_d.is_finite() || self.eps_d < 0.0 {
            return Err(Error::ConfigError(format!("eps_d must be finite and >= 0, got {}", self.eps_d)));
        }
        if self.workers == Some(0) {
            return Err(Error::ConfigError("workers must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::default_for(DeviceParams::default(), DEFAULT_EPS_D)
    }
}

/// Solves one drive setting with the chosen solver.
pub fn solve_point(device: &DeviceParams, drive: &DriveParams, solver: Solver) -> Result<PointResult> {
    drive.validate()?;
    if solver == Solver::Analytic {
        return analytic_point(device, drive);
    }
    let h = build_h_sigma(device, drive)?;
    let eig = diagonalize(&h)?;
    let strengths = transition_strengths(&eig);
    let pump = pump_rates_with(&eig, &strengths, device, drive)?;
    let (rho, residual) = match solver {
        Solver::Rates => {
            let total = total_rates(&pump, &strengths, device)?;
            let p = stationary_distribution(&total)?;
            let residual = rate_equation_residual(&total, &p);
            (DensityMatrix::from_populations(&eig, &p)?, residual)
        }
        Solver::Nullspace => {
            let l = full_liouvillian(&eig, &dissipative_jumps(device)?, &pump)?;
            let rho = steady_state_nullspace(&l)?;
            let residual = l.residual(&rho);
            (rho, residual)
        }
        Solver::Analytic => unreachable!(),
    };
    let checks = rho.checks();
    let currents = current_operator_expectation(&rho, device, drive)?;
    let spread = spread(&currents.bonds);
    Ok(PointResult {
        omega_d: drive.omega_d,
        phi: drive.phi,
        current_natural: currents.mean,
        current_si: current_per_second(currents.mean),
        populations: populations_nk(&rho, device)?,
        bond_currents: currents.bonds,
        diagnostics: Diagnostics {
            solver,
            trace_error: checks.trace_error,
            hermiticity_error: checks.hermiticity_error,
            min_eigenvalue: checks.min_eigenvalue,
            residual,
            bond_spread: spread,
        },
    })
}

/// Each |k⟩ is pumped from the empty ring at Γ_{0→k} and lost at
/// γ + 2γ_φ(N−1)/N; the populations of the resulting star-shaped rate
/// network are n_k = Γ_{0→k} / (γ_eff + Σ_q Γ_{0→q}).
pub fn analytic_point(device: &DeviceParams, drive: &DriveParams) -> Result<PointResult> {
    drive.validate()?;
    let n = device.n_sites;
    let pumps = (0..n)
        .map(|k| pump_rate_analytic(k, device, drive))
        .collect::<Result<Vec<_>>>()?;
    let loss = device.gamma + 2.0 * device.gamma_phi * (n as f64 - 1.0) / n as f64;
    let denom = loss + pumps.iter().sum::<f64>();
    let n_k: Vec<f64> = pumps.iter().map(|g| g / denom).collect();
    let ground = loss / denom;
    let current = current_from_populations(&n_k, drive.phi, device);
    let min_pop = n_k.iter().copied().fold(ground, f64::min);
    Ok(PointResult {
        omega_d: drive.omega_d,
        phi: drive.phi,
        current_natural: current,
        current_si: current_per_second(current),
        populations: Populations { n_k, ground },
        bond_currents: vec![current; n],
        diagnostics: Diagnostics {
            solver: Solver::Analytic,
            trace_error: 0.0,
            hermiticity_error: 0.0,
            min_eigenvalue: min_pop,
            residual: 0.0,
            bond_spread: 0.0,
        },
    })
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Cell {
    Ok(PointResult),
    Failed { omega_d: f64, phi: f64, error: String },
}

impl Cell {
    pub fn point(&self) -> Option<&PointResult> {
        match self {
            Cell::Ok(p) => Some(p),
            Cell::Failed { .. } => None,
        }
    }

    pub fn current(&self) -> Option<f64> {
        self.point().map(|p| p.current_natural)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub device: DeviceParams,
    pub eps_d: f64,
    pub solver: Solver,
    pub version: String,
    /// Excluded from every comparable payload.
    pub wall_time_s: f64,
}

/// Cells are stored row-major with φ outer and ω_d inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub omega_d: Vec<f64>,
    pub phi: Vec<f64>,
    pub cells: Vec<Cell>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn n_sites(&self) -> usize {
        self.metadata.device.n_sites
    }

    pub fn cell(&self, i_phi: usize, j_omega: usize) -> &Cell {
        &self.cells[i_phi * self.omega_d.len() + j_omega]
    }

    pub fn current(&self, i_phi: usize, j_omega: usize) -> Option<f64> {
        self.cell(i_phi, j_omega).current()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.point().is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, otherwise sequential.
    Parallel,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, Execution::Parallel)
}

/// [`run_sweep`] with the solver forced to the analytic model.
pub fn analytic_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let spec = SweepSpec {
        solver: Solver::Analytic,
        ..spec.clone()
    };
    run_sweep(&spec)
}

pub fn run_sweep_with(spec: &SweepSpec, execution: Execution) -> Result<SweepResult> {
    spec.validate()?;
    let started = Instant::now();
    let omegas = spec.omega_d.values();
    let phis = spec.phi.values();
    let jobs: Vec<(f64, f64)> = phis
        .iter()
        .flat_map(|&p| omegas.iter().map(move |&w| (w, p)))
        .collect();
    let work = |&(omega_d, phi): &(f64, f64)| -> Cell {
        let drive = DriveParams::new(omega_d, phi, spec.eps_d);
        match solve_point(&spec.device, &drive, spec.solver) {
            Ok(mut point) => {
                // report the grid value, not its reduction into [0, 2π)
                point.phi = phi;
                Cell::Ok(point)
            }
            Err(e) => {
                debug!("cell (omega_d={omega_d}, phi={phi}) failed: {e}");
                Cell::Failed {
                    omega_d,
                    phi,
                    error: e.to_string(),
                }
            }
        }
    };
    let cells = match execution {
        Execution::Sequential => jobs.iter().map(work).collect(),
        Execution::Parallel => map_parallel(&jobs, spec.workers, work)?,
    };
    Ok(SweepResult {
        omega_d: omegas,
        phi: phis,
        cells,
        metadata: SweepMetadata {
            device: spec.device.clone(),
            eps_d: spec.eps_d,
            solver: spec.solver,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(feature = "parallel")]
fn map_parallel<F>(jobs: &[(f64, f64)], workers: Option<usize>, work: F) -> Result<Vec<Cell>>
where
    F: Fn(&(f64, f64)) -> Cell + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::ConfigError(format!("thread pool: {e}")))?;
            Ok(pool.install(|| jobs.par_iter().map(&work).collect()))
        }
        None => Ok(jobs.par_iter().map(&work).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_parallel<F>(jobs: &[(f64, f64)], _workers: Option<usize>, work: F) -> Result<Vec<Cell>>
where
    F: Fn(&(f64, f64)) -> Cell,
{
    Ok(jobs.iter().map(work).collect())
}

/// Connected set of grid cells where two sweeps disagree in sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementCluster {
    /// (φ index, ω_d index) pairs, sorted.
    pub cells: Vec<(usize, usize)>,
    pub phi_range: (f64, f64),
    pub omega_d_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub floor: f64,
    /// Fraction of compared cells whose currents share a sign.
    pub agreement: f64,
    pub compared: usize,
    /// Cells where both |𝓘| fall below the floor.
    pub masked: usize,
    /// Cells failed in either sweep.
    pub failed: usize,
    /// Largest first.
    pub clusters: Vec<DisagreementCluster>,
}

/// Default comparison floor as a fraction of 2J_0/N.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.01;

/// Cellwise sign comparison. A cell is compared when either current reaches
/// `floor` (default 1% of 2J_0/N); disagreeing cells are grouped into
/// 4-connected clusters.
pub fn compare_sweeps(a: &SweepResult, b: &SweepResult, floor: Option<f64>) -> Result<ComparisonReport> {
    if a.omega_d != b.omega_d || a.phi != b.phi {
        return Err(Error::AxisMismatch(format!(
            "{}x{} grid vs {}x{} grid or differing axis values",
            a.phi.len(),
            a.omega_d.len(),
            b.phi.len(),
            b.omega_d.len()
        )));
    }
    if a.n_sites() != b.n_sites() {
        return Err(Error::AxisMismatch(format!("N = {} vs N = {}", a.n_sites(), b.n_sites())));
    }
    let floor = floor.unwrap_or(DEFAULT_FLOOR_FRACTION * a.metadata.device.current_scale());
    let (rows, cols) = (a.phi.len(), a.omega_d.len());
    let mut disagree = vec![false; rows * cols];
    let (mut compared, mut masked, mut failed, mut agreed) = (0, 0, 0, 0);
    for idx in 0..rows * cols {
        match (a.cells[idx].current(), b.cells[idx].current()) {
            (Some(x), Some(y)) => {
                if x.abs() >= floor || y.abs() >= floor {
                    compared += 1;
                    if sign(x) == sign(y) {
                        agreed += 1;
                    } else {
                        disagree[idx] = true;
                    }
                } else {
                    masked += 1;
                }
            }
            _ => failed += 1,
        }
    }
    let agreement = if compared == 0 {
        1.0
    } else {
        agreed as f64 / compared as f64
    };
    Ok(ComparisonReport {
        floor,
        agreement,
        compared,
        masked,
        failed,
        clusters: clusters(&disagree, rows, cols, &a.phi, &a.omega_d),
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn clusters(mask: &[bool], rows: usize, cols: usize, phi: &[f64], omega: &[f64]) -> Vec<DisagreementCluster> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut cells = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / cols, idx % cols);
            cells.push((r, c));
            let mut visit = |rr: usize, cc: usize| {
                let j = rr * cols + cc;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < rows {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < cols {
                visit(r, c + 1);
            }
        }
        cells.sort_unstable();
        let (r_lo, r_hi) = (cells.iter().map(|x| x.0).min().unwrap(), cells.iter().map(|x| x.0).max().unwrap());
        let (c_lo, c_hi) = (cells.iter().map(|x| x.1).min().unwrap(), cells.iter().map(|x| x.1).max().unwrap());
        out.push(DisagreementCluster {
            cells,
            phi_range: (phi[r_lo], phi[r_hi]),
            omega_d_range: (omega[c_lo], omega[c_hi]),
        });
    }
    out.sort_by(|x, y| y.cells.len().cmp(&x.cells.len()).then(x.cells[0].cmp(&y.cells[0])));
    out
}
