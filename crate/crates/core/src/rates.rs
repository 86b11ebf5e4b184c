//! Cavity-assisted pump rates and local qubit dissipation.
//!
//! Each cavity is an independent zero-temperature bath with a Lorentzian
//! density of states. Only emission into the cavities is kept, so a pump
//! transition m → n is weighted by ρ(ω_d + E_m − E_n).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::model::{derived_scales, DeviceParams, DriveParams};
use crate::operators::{pauli_site, Pauli, QubitOperator};
use crate::spectrum::{analytic_spectrum, EigenSystem};

/// Lorentzian cavity density of states ρ(ω) = (κ/2π) / ((ω−ω_c)² + κ²/4).
pub fn lorentzian_dos(omega: f64, omega_c: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", format!("must be finite and > 0, got {kappa}")));
    }
    Ok(lorentzian(omega, omega_c, kappa))
}

#[inline]
fn lorentzian(omega: f64, omega_c: f64, kappa: f64) -> f64 {
    let x = omega - omega_c;
    (kappa / (2.0 * PI)) / (x * x + 0.25 * kappa * kappa)
}

/// Squared pump matrix element Λ² = (g/Δ)⁶ (1 + 2Δ/Δ_c)² ε_d⁴ / Δ_q².
pub fn pump_matrix_element(device: &DeviceParams, drive: &DriveParams) -> Result<f64> {
    let s = derived_scales(device, drive)?;
    if s.delta_c == 0.0 {
        return Err(Error::PerturbationInvalid("drive resonant with the cavities (Δ_c = 0)".into()));
    }
    if s.delta_q == 0.0 {
        return Err(Error::PerturbationInvalid("drive resonant with the qubits (Δ_q = 0)".into()));
    }
    let r = device.dispersive_ratio();
    let lever = 1.0 + 2.0 * s.delta / s.delta_c;
    let e2 = drive.eps_d * drive.eps_d;
    Ok(r.powi(6) * lever * lever * e2 * e2 / (s.delta_q * s.delta_q))
}

/// Perturbative pump rate Γ_{0→k} = 2πΛ² ρ(ω_d + Ẽ_0 − Ẽ_k) for k = 2πn/N.
pub fn pump_rate_analytic(n: usize, device: &DeviceParams, drive: &DriveParams) -> Result<f64> {
    if n >= device.n_sites {
        return Err(Error::IndexOutOfRange { index: n, limit: device.n_sites });
    }
    if drive.eps_d == 0.0 {
        return Ok(0.0);
    }
    let lambda2 = pump_matrix_element(device, drive)?;
    let spec = analytic_spectrum(device, drive)?;
    let omega = drive.omega_d + spec.tilde_e0 - spec.tilde_e_k[n];
    Ok(2.0 * PI * lambda2 * lorentzian_dos(omega, device.omega_c, device.kappa)?)
}

/// Prefactor 2π (g/Δ)⁴ |Δā + ε_d/2|² of every full pump rate.
pub fn pump_prefactor(device: &DeviceParams, drive: &DriveParams) -> Result<f64> {
    let s = derived_scales(device, drive)?;
    let r2 = device.dispersive_ratio().powi(2);
    let amp = s.a_bar * s.delta + Complex64::new(0.5 * drive.eps_d, 0.0);
    Ok(2.0 * PI * r2 * r2 * amp.norm_sqr())
}

/// Σ_i |⟨n|X_i|m⟩|² for the site-local σ^z and σ^− families, stored
/// row-major as `[m * dim + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStrengths {
    dim: usize,
    pub sigma_z: Vec<f64>,
    pub sigma_minus: Vec<f64>,
}

impl TransitionStrengths {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn z(&self, m: usize, n: usize) -> f64 {
        self.sigma_z[m * self.dim + n]
    }

    pub fn minus(&self, m: usize, n: usize) -> f64 {
        self.sigma_minus[m * self.dim + n]
    }
}

pub fn transition_strengths(eig: &EigenSystem) -> TransitionStrengths {
    let n_sites = eig.n_sites();
    let dim = eig.dim();
    let v = eig.states();
    let vh = v.adjoint();
    let mut sigma_z = vec![0.0; dim * dim];
    let mut sigma_minus = vec![0.0; dim * dim];
    let mut zv = CMatrix::zeros(dim, dim);
    let mut mv = CMatrix::zeros(dim, dim);
    for site in 0..n_sites {
        let bit = 1usize << site;
        mv.fill(Complex64::new(0.0, 0.0));
        for s in 0..dim {
            let up = s & bit != 0;
            for c in 0..dim {
                zv[(s, c)] = if up { v[(s, c)] } else { -v[(s, c)] };
            }
            if up {
                for c in 0..dim {
                    mv[(s ^ bit, c)] = v[(s, c)];
                }
            }
        }
        let z = &vh * &zv;
        let lower = &vh * &mv;
        for m in 0..dim {
            for n in 0..dim {
                sigma_z[m * dim + n] += z[(n, m)].norm_sqr();
                sigma_minus[m * dim + n] += lower[(n, m)].norm_sqr();
            }
        }
    }
    TransitionStrengths {
        dim,
        sigma_z,
        sigma_minus,
    }
}

/// Directed rates between eigenstates; `get(m, n)` is the rate m → n.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    dim: usize,
    rates: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rates: vec![0.0; dim * dim],
        }
    }

    /// Builds from a row-major `from × to` table, checking finiteness and sign.
    pub fn from_rows(dim: usize, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: rates.len(),
            });
        }
        let mut out = Self { dim, rates };
        for m in 0..dim {
            out.rates[m * dim + m] = 0.0;
        }
        if let Some(bad) = out.rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::SingularRateGraph(format!("rate {bad} is negative or non-finite")));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.dim + to]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Total escape rate out of `from`.
    pub fn outflow(&self, from: usize) -> f64 {
        self.rates[from * self.dim..(from + 1) * self.dim].iter().sum()
    }

    pub(crate) fn add_assign(&mut self, other: &RateMatrix) {
        for (a, b) in self.rates.iter_mut().zip(&other.rates) {
            *a += b;
        }
    }
}

/// Γ_{m→n} = 2π (g/Δ)⁴ |Δā + ε_d/2|² Σ_i |⟨n|σ_i^z|m⟩|² ρ(ω_d + E_m − E_n).
pub fn pump_rates_full(eig: &EigenSystem, device: &DeviceParams, drive: &DriveParams) -> Result<RateMatrix> {
    pump_rates_with(eig, &transition_strengths(eig), device, drive)
}

/// [`pump_rates_full`] with precomputed transition strengths.
pub fn pump_rates_with(
    eig: &EigenSystem,
    strengths: &TransitionStrengths,
    device: &DeviceParams,
    drive: &DriveParams,
) -> Result<RateMatrix> {
    let dim = eig.dim();
    if strengths.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: strengths.dim(),
        });
    }
    lorentzian_dos(device.omega_c, device.omega_c, device.kappa)?;
    let pre = pump_prefactor(device, drive)?;
    let e = eig.energies();
    let mut rates = vec![0.0; dim * dim];
    if pre > 0.0 {
        for m in 0..dim {
            for n in 0..dim {
                if m != n {
                    let omega = drive.omega_d + e[m] - e[n];
                    rates[m * dim + n] = pre * strengths.z(m, n) * lorentzian(omega, device.omega_c, device.kappa);
                }
            }
        }
    }
    RateMatrix::from_rows(dim, rates)
}

/// Qubit decay γ Σ_i|⟨n|σ_i^−|m⟩|² plus dephasing (γ_φ/2) Σ_i|⟨n|σ_i^z|m⟩|².
pub fn local_rates(strengths: &TransitionStrengths, device: &DeviceParams) -> Result<RateMatrix> {
    let dim = strengths.dim();
    let mut rates = vec![0.0; dim * dim];
    for m in 0..dim {
        for n in 0..dim {
            if m != n {
                rates[m * dim + n] =
                    device.gamma * strengths.minus(m, n) + 0.5 * device.gamma_phi * strengths.z(m, n);
            }
        }
    }
    RateMatrix::from_rows(dim, rates)
}

/// Lindblad operator √rate · operator.
#[derive(Debug, Clone)]
pub struct Jump {
    pub rate: f64,
    pub operator: QubitOperator,
}

impl Jump {
    pub fn lindblad(&self) -> CMatrix {
        self.operator.matrix() * Complex64::new(self.rate.sqrt(), 0.0)
    }
}

/// Site-local jumps √γ σ_i^− and √(γ_φ/2) σ_i^z. Zero rates are skipped.
pub fn dissipative_jumps(device: &DeviceParams) -> Result<Vec<Jump>> {
    let n = device.n_sites;
    let mut jumps = Vec::new();
    for (rate, kind) in [(device.gamma, Pauli::Minus), (0.5 * device.gamma_phi, Pauli::Z)] {
        if !rate.is_finite() || rate < 0.0 {
            return Err(invalid("gamma", format!("jump rate {rate} must be finite and >= 0")));
        }
        if rate == 0.0 {
            continue;
        }
        for site in 0..n {
            jumps.push(Jump {
                rate,
                operator: pauli_site(kind, site, n)?,
            });
        }
    }
    Ok(jumps)
}
