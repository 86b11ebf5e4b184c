//! Physical parameters of the ring, the drive, and the scales derived from them.
//!
//! Every angular frequency and rate is stored in units of 2π·GHz, i.e. the
//! plain numbers a circuit-QED experimentalist quotes ("ω_q = 7"). The only
//! conversion to SI lives in [`ANGULAR_GHZ_TO_PER_SECOND`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Multiply a quantity in 2π·GHz by this to get s⁻¹.
pub const ANGULAR_GHZ_TO_PER_SECOND: f64 = 2.0 * PI * 1.0e9;

/// Largest ring handled by the dense-matrix code paths.
pub const MAX_SITES: usize = 12;

/// Default ratio demanded between consecutive scales of the frequency hierarchy.
pub const DEFAULT_HIERARCHY_FACTOR: f64 = 3.0;

/// Default cavity drive amplitude ε_d. Puts the resonant pump rate
/// (≈ 2.5e-5) above the qubit decay γ and below the cavity width κ.
pub const DEFAULT_EPS_D: f64 = 0.05;

/// Device constants: the ring of qubits, their cavities, and the intrinsic
/// dissipation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Number of qubits N on the ring.
    pub n_sites: usize,
    /// Qubit base splitting ω_q.
    pub omega_q: f64,
    /// Cavity base frequency ω_c.
    pub omega_c: f64,
    /// Rabi light-matter coupling g.
    pub g: f64,
    /// Hopping amplitude J_0.
    pub j0: f64,
    /// Cavity damping κ.
    pub kappa: f64,
    /// Qubit decay γ.
    pub gamma: f64,
    /// Qubit dephasing γ_φ.
    pub gamma_phi: f64,
    /// Per-site detunings δ_i. Only used to validate the hierarchy; the
    /// rotating-frame model is translationally invariant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            n_sites: 3,
            omega_q: 7.0,
            omega_c: 6.0,
            g: 1.0e-1,
            j0: 1.0e-3,
            kappa: 1.0e-4,
            gamma: 1.0e-5,
            gamma_phi: 1.0e-6,
            deltas: None,
        }
    }
}

impl DeviceParams {
    /// Qubit-cavity detuning Δ = ω_q − ω_c.
    pub fn delta(&self) -> f64 {
        self.omega_q - self.omega_c
    }

    /// Dispersive ratio g/Δ.
    pub fn dispersive_ratio(&self) -> f64 {
        self.g / self.delta()
    }

    /// Hilbert-space dimension 2^N.
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Quasi-momentum k = 2πn/N.
    pub fn momentum(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 / self.n_sites as f64
    }

    /// Natural current scale 2J_0/N carried by a fully populated chiral state.
    pub fn current_scale(&self) -> f64 {
        2.0 * self.j0 / self.n_sites as f64
    }
}

/// Cavity drive settings. The coupler phase φ is shared by every bond, the
/// drive amplitude by every cavity, and all drive phases are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveParams {
    /// Cavity drive frequency ω_d.
    pub omega_d: f64,
    /// Coupler phase φ, kept in [0, 2π).
    pub phi: f64,
    /// Drive amplitude ε_d.
    pub eps_d: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            omega_d: 6.5,
            phi: PI / 2.0,
            eps_d: DEFAULT_EPS_D,
        }
    }
}

impl DriveParams {
    pub fn new(omega_d: f64, phi: f64, eps_d: f64) -> Self {
        Self {
            omega_d,
            phi: normalize_phase(phi),
            eps_d,
        }
    }

    pub fn with_omega_d(self, omega_d: f64) -> Self {
        Self { omega_d, ..self }
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self {
            phi: normalize_phase(phi),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_d.is_finite() {
            return Err(invalid("omega_d", "must be finite"));
        }
        if !self.phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        if !self.eps_d.is_finite() || self.eps_d < 0.0 {
            return Err(invalid("eps_d", format!("must be finite and >= 0, got {}", self.eps_d)));
        }
        Ok(())
    }
}

/// Maps any finite phase into [0, 2π).
pub fn normalize_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Scales derived from device and drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScales {
    /// Δ = ω_q − ω_c.
    pub delta: f64,
    /// Δ_q = ω_q − ω_d.
    pub delta_q: f64,
    /// Δ_c = ω_d − ω_c.
    pub delta_c: f64,
    /// Drive-renormalized Lamb shift δω_q.
    pub lamb_shift: f64,
    /// Classical cavity background ā.
    pub a_bar: Complex64,
    /// Transverse field h_x = 2(g/Δ)ε_d.
    pub h_x: f64,
    /// Longitudinal field h_z = Δ_q + δω_q.
    pub h_z: f64,
    /// Center ω̄_d of the optimal drive frequencies.
    pub omega_d_bar: f64,
}

/// Drive-renormalized Lamb shift δω_q = (g/Δ)²Δ[1 + 12(ε_d/Δ)²].
pub fn lamb_shift(device: &DeviceParams, eps_d: f64) -> f64 {
    let delta = device.delta();
    let r = device.dispersive_ratio();
    r * r * delta * (1.0 + 12.0 * (eps_d / delta).powi(2))
}

/// ω̄_d from 2ω̄_d = ω_c + ω_q + δω_q + (g/Δ)²Nε_d²/Δ.
pub fn omega_d_bar(device: &DeviceParams, eps_d: f64) -> f64 {
    let delta = device.delta();
    let r = device.dispersive_ratio();
    let n = device.n_sites as f64;
    0.5 * (device.omega_c + device.omega_q + lamb_shift(device, eps_d) + r * r * n * eps_d * eps_d / delta)
}

pub fn derived_scales(device: &DeviceParams, drive: &DriveParams) -> Result<DerivedScales> {
    let delta_q = device.omega_q - drive.omega_d;
    let delta_c = drive.omega_d - device.omega_c;
    // summed rather than recomputed from ω_q − ω_c so the identity holds bitwise
    let delta = delta_q + delta_c;
    let denom = Complex64::new(delta_c, 0.5 * device.kappa);
    if denom.norm() == 0.0 {
        return Err(Error::DegenerateDrive);
    }
    let a_bar = Complex64::new(drive.eps_d, 0.0) / denom;
    let shift = lamb_shift(device, drive.eps_d);
    Ok(DerivedScales {
        delta,
        delta_q,
        delta_c,
        lamb_shift: shift,
        a_bar,
        h_x: 2.0 * device.dispersive_ratio() * drive.eps_d,
        h_z: delta_q + shift,
        omega_d_bar: omega_d_bar(device, drive.eps_d),
    })
}

/// One link of the frequency hierarchy Δ ≫ g ≫ |δ_i| ≫ J_0 ≫ κ ≫ γ ≫ γ_φ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyCheck {
    pub label: String,
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HierarchyCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.warnings.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "WARN" };
            writeln!(f, "{status:>4}  {:<20} ratio {:>10.3e} (>= {})", c.label, c.ratio, c.threshold)?;
        }
        for w in &self.warnings {
            writeln!(f, "WARN  {w}")?;
        }
        Ok(())
    }
}

pub fn validate(device: &DeviceParams) -> Result<ValidationReport> {
    validate_with(device, DEFAULT_HIERARCHY_FACTOR)
}

/// Hard errors for unusable parameters; hierarchy violations become warnings.
pub fn validate_with(device: &DeviceParams, factor: f64) -> Result<ValidationReport> {
    if device.n_sites < 3 {
        return Err(invalid("n_sites", format!("a ring needs at least 3 sites, got {}", device.n_sites)));
    }
    if device.n_sites > MAX_SITES {
        return Err(Error::TooManySites {
            n_sites: device.n_sites,
            limit: MAX_SITES,
        });
    }
    let finite: [(&'static str, f64); 2] = [("omega_q", device.omega_q), ("omega_c", device.omega_c)];
    for (name, v) in finite {
        if !v.is_finite() {
            return Err(invalid(name, "must be finite"));
        }
    }
    let positive: [(&'static str, f64); 5] = [
        ("g", device.g),
        ("j0", device.j0),
        ("kappa", device.kappa),
        ("gamma", device.gamma),
        ("gamma_phi", device.gamma_phi),
    ];
    for (name, v) in positive {
        if !v.is_finite() || v <= 0.0 {
            return Err(invalid(name, format!("must be finite and > 0, got {v}")));
        }
    }
    if device.omega_q <= device.omega_c {
        return Err(invalid(
            "omega_q",
            format!("must exceed omega_c ({} <= {})", device.omega_q, device.omega_c),
        ));
    }

    let mut warnings = Vec::new();
    let mut links: Vec<(String, f64, f64)> = vec![("Delta >> g".into(), device.delta(), device.g)];
    match &device.deltas {
        Some(deltas) => {
            if deltas.len() != device.n_sites {
                return Err(invalid(
                    "deltas",
                    format!("expected {} entries, got {}", device.n_sites, deltas.len()),
                ));
            }
            if deltas.iter().any(|d| !d.is_finite()) {
                return Err(invalid("deltas", "entries must be finite"));
            }
            let max = deltas.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            let min = deltas.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
            links.push(("g >> |delta_i|".into(), device.g, max));
            links.push(("|delta_i| >> J0".into(), min, device.j0));
            let n = deltas.len();
            for i in 0..n {
                if deltas[i] == deltas[(i + 1) % n] {
                    warnings.push(format!(
                        "coupler frequency delta_{i} - delta_{} vanishes; the rotating frame needs it nonzero",
                        (i + 1) % n
                    ));
                }
            }
        }
        None => links.push(("g >> J0".into(), device.g, device.j0)),
    }
    links.push(("J0 >> kappa".into(), device.j0, device.kappa));
    links.push(("kappa >> gamma".into(), device.kappa, device.gamma));
    links.push(("gamma >> gamma_phi".into(), device.gamma, device.gamma_phi));

    let checks = links
        .into_iter()
        .map(|(label, big, small)| {
            let ratio = big / small;
            HierarchyCheck {
                label,
                ratio,
                threshold: factor,
                pass: ratio >= factor,
            }
        })
        .collect();
    Ok(ValidationReport { checks, warnings })
}
