//! TOML run configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chiral_ring::model::{normalize_phase, omega_d_bar};
use chiral_ring::sweep::{Axis, Solver, SweepSpec, DEFAULT_OMEGA_STEPS, DEFAULT_PHI_STEPS, DEFAULT_WINDOW_J0};
use chiral_ring::{DeviceParams, DriveParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub drive: DriveParams,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Lower ω_d bound; defaults to ω̄_d − 4J_0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d_lo: Option<f64>,
    /// Upper ω_d bound; defaults to ω̄_d + 4J_0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d_hi: Option<f64>,
    pub omega_d_steps: usize,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub phi_steps: usize,
    pub solver: Solver,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            omega_d_lo: None,
            omega_d_hi: None,
            omega_d_steps: DEFAULT_OMEGA_STEPS,
            phi_lo: 0.0,
            phi_hi: 2.0 * PI,
            phi_steps: DEFAULT_PHI_STEPS,
            solver: Solver::Rates,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: PathBuf,
    pub format: Format,
    /// Significant digits of every float written.
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("sweep.csv"),
            format: Format::Csv,
            precision: 17,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.drive.phi = normalize_phase(cfg.drive.phi);
        if !(1..=17).contains(&cfg.output.precision) {
            return Err(CliError::Config(format!(
                "output.precision must be between 1 and 17, got {}",
                cfg.output.precision
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads `path` if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let center = omega_d_bar(&self.device, self.drive.eps_d);
        let half = DEFAULT_WINDOW_J0 * self.device.j0;
        SweepSpec {
            device: self.device.clone(),
            eps_d: self.drive.eps_d,
            omega_d: Axis::new(
                self.sweep.omega_d_lo.unwrap_or(center - half),
                self.sweep.omega_d_hi.unwrap_or(center + half),
                self.sweep.omega_d_steps,
            ),
            phi: Axis::new(self.sweep.phi_lo, self.sweep.phi_hi, self.sweep.phi_steps),
            solver: self.sweep.solver,
            workers: self.sweep.threads,
        }
    }
}

/// One documented configuration key.
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub unit: &'static str,
    pub meaning: &'static str,
}

pub const KEYS: &[KeyDoc] = &[
    KeyDoc { key: "device.n_sites", default: "3", unit: "count", meaning: "qubits N on the ring (3..=12)" },
    KeyDoc { key: "device.omega_q", default: "7.0", unit: "2π·GHz", meaning: "qubit splitting ω_q" },
    KeyDoc { key: "device.omega_c", default: "6.0", unit: "2π·GHz", meaning: "cavity frequency ω_c" },
    KeyDoc { key: "device.g", default: "0.1", unit: "2π·GHz", meaning: "qubit-cavity coupling g" },
    KeyDoc { key: "device.j0", default: "0.001", unit: "2π·GHz", meaning: "hopping amplitude J_0" },
    KeyDoc { key: "device.kappa", default: "0.0001", unit: "2π·GHz", meaning: "cavity damping κ" },
    KeyDoc { key: "device.gamma", default: "1e-5", unit: "2π·GHz", meaning: "qubit decay γ" },
    KeyDoc { key: "device.gamma_phi", default: "1e-6", unit: "2π·GHz", meaning: "qubit dephasing γ_φ" },
    KeyDoc { key: "device.deltas", default: "unset", unit: "2π·GHz", meaning: "per-site offsets δ_i, hierarchy check only" },
    KeyDoc { key: "drive.omega_d", default: "6.5", unit: "2π·GHz", meaning: "drive frequency ω_d (point)" },
    KeyDoc { key: "drive.phi", default: "1.5707963267948966", unit: "rad", meaning: "coupler phase φ (point)" },
    KeyDoc { key: "drive.eps_d", default: "0.05", unit: "2π·GHz", meaning: "drive amplitude ε_d" },
    KeyDoc { key: "sweep.omega_d_lo", default: "ω̄_d − 4J_0", unit: "2π·GHz", meaning: "first ω_d grid value" },
    KeyDoc { key: "sweep.omega_d_hi", default: "ω̄_d + 4J_0", unit: "2π·GHz", meaning: "last ω_d grid value" },
    KeyDoc { key: "sweep.omega_d_steps", default: "101", unit: "count", meaning: "ω_d grid points" },
    KeyDoc { key: "sweep.phi_lo", default: "0", unit: "rad", meaning: "first φ grid value" },
    KeyDoc { key: "sweep.phi_hi", default: "6.283185307179586", unit: "rad", meaning: "last φ grid value" },
    KeyDoc { key: "sweep.phi_steps", default: "121", unit: "count", meaning: "φ grid points" },
    KeyDoc { key: "sweep.solver", default: "rates", unit: "-", meaning: "rates | nullspace | analytic" },
    KeyDoc { key: "sweep.threads", default: "all cores", unit: "count", meaning: "worker threads" },
    KeyDoc { key: "output.path", default: "sweep.csv", unit: "path", meaning: "sweep output file" },
    KeyDoc { key: "output.format", default: "csv", unit: "-", meaning: "csv | json" },
    KeyDoc { key: "output.precision", default: "17", unit: "digits", meaning: "significant digits of floats" },
];

/// Key table appended to `--help`.
pub fn key_help() -> String {
    let mut out = String::from("Configuration keys (TOML sections [device] [drive] [sweep] [output]):\n");
    for k in KEYS {
        let _ = writeln!(out, "  {:<20} default {:<20} [{}] {}", k.key, k.default, k.unit, k.meaning);
    }
    out
}
