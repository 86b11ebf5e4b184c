//! Exact diagonalization of the qubit Hamiltonian and the perturbative
//! single-excitation spectrum used by the analytic branch.
//!
//! Operators that commute with the ring translation T are diagonalized
//! sector by sector in momentum. Every eigenvector then carries a definite
//! quasi-momentum, which fixes the basis inside degenerate levels (e.g. the
//! pair k, −k at zero flux) without any arbitrary choice by the solver.
//! Other operators fall back to a plain dense solve with degenerate clusters
//! ordered by their overlap with the chiral states.

use std::cmp::Ordering;
use std::f64::consts::PI;

use log::warn;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::model::{derived_scales, DeviceParams, DriveParams};
use crate::operators::{chiral_state, ground_state, translate_index, QubitOperator, StateVector};

/// Energies closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 500;
const JACOBI_SWEEPS: usize = 8;

/// Sorted eigenvalues and orthonormal eigenvectors (columns of `states`).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    n_sites: usize,
    energies: Vec<f64>,
    states: CMatrix,
    excitation_labels: Vec<usize>,
    momentum_labels: Vec<Option<usize>>,
}

impl EigenSystem {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn state(&self, index: usize) -> CVector {
        self.states.column(index).into_owned()
    }

    /// Nearest-integer number of excitations; a diagnostic only.
    pub fn excitation_labels(&self) -> &[usize] {
        &self.excitation_labels
    }

    /// Momentum index n (k = 2πn/N) when the operator was translation invariant.
    pub fn momentum_labels(&self) -> &[Option<usize>] {
        &self.momentum_labels
    }

    /// V† A V, i.e. `op` in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.states.adjoint() * op * &self.states
    }

    /// Index of the eigenstate with the largest overlap with `target`.
    pub fn best_overlap(&self, target: &StateVector) -> usize {
        let overlaps = self.states.adjoint() * target.amplitudes();
        overlaps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap_or(Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// max |H V − V E|.
    pub fn residual(&self, h: &CMatrix) -> f64 {
        let hv = h * &self.states;
        let mut err = 0.0_f64;
        for (j, &e) in self.energies.iter().enumerate() {
            for i in 0..self.dim() {
                err = err.max((hv[(i, j)] - self.states[(i, j)] * e).norm());
            }
        }
        err
    }

    /// max |V†V − 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.states.adjoint() * &self.states;
        let mut err = 0.0_f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        err
    }
}

struct Eigenpair {
    energy: f64,
    vector: CVector,
    momentum: Option<usize>,
}

pub fn diagonalize(h: &QubitOperator) -> Result<EigenSystem> {
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let herm = h.hermiticity_error();
    if herm > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let n_sites = h.n_sites();
    let mut pairs = if commutes_with_translation(h) {
        diagonalize_by_momentum(h)?
    } else {
        let mut pairs = dense_eigenpairs(h.matrix())?;
        for p in &mut pairs {
            p.momentum = None;
        }
        pairs
    };
    pairs.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap_or(Ordering::Equal));
    order_degenerate_clusters(&mut pairs, n_sites);

    let dim = h.dim();
    let mut states = CMatrix::zeros(dim, dim);
    let mut energies = Vec::with_capacity(dim);
    let mut excitation_labels = Vec::with_capacity(dim);
    let mut momentum_labels = Vec::with_capacity(dim);
    for (j, p) in pairs.into_iter().enumerate() {
        let v = fix_phase(p.vector);
        let number: f64 = v
            .iter()
            .enumerate()
            .map(|(s, z)| z.norm_sqr() * s.count_ones() as f64)
            .sum();
        excitation_labels.push(number.round() as usize);
        momentum_labels.push(p.momentum);
        energies.push(p.energy);
        states.set_column(j, &v);
    }
    Ok(EigenSystem {
        n_sites,
        energies,
        states,
        excitation_labels,
        momentum_labels,
    })
}

fn commutes_with_translation(h: &QubitOperator) -> bool {
    let n = h.n_sites();
    if n < 2 {
        return false;
    }
    let m = h.matrix();
    let tol = 1e-13 * h.max_abs().max(1e-300);
    // T H T† has entries H[T⁻¹r, T⁻¹c]; compare entrywise without forming T
    for r in 0..m.nrows() {
        let tr = translate_index(r, n);
        for c in 0..m.ncols() {
            let tc = translate_index(c, n);
            if (m[(tr, tc)] - m[(r, c)]).norm() > tol {
                return false;
            }
        }
    }
    true
}

fn dense_eigenpairs(m: &CMatrix) -> Result<Vec<Eigenpair>> {
    // symmetrize so rounding-level asymmetry cannot leak into the solver
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::EigenFailure("symmetric QR iteration did not converge".into()))?;
    let mut vectors = eig.eigenvectors;
    // the implicit QR stops early on extremal pairs; a few Jacobi sweeps on
    // the nearly diagonal V†HV bring residuals back to rounding level
    let mut reduced = vectors.adjoint() * &sym * &vectors;
    jacobi_polish(&mut reduced, &mut vectors);
    let energies: Vec<f64> = (0..reduced.nrows()).map(|j| reduced[(j, j)].re).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok(energies
        .into_iter()
        .enumerate()
        .map(|(j, energy)| Eigenpair {
            energy,
            vector: vectors.column(j).into_owned(),
            momentum: None,
        })
        .collect())
}

/// Cyclic complex Jacobi on a Hermitian matrix that is already close to
/// diagonal. Rotations are accumulated into `v`.
fn jacobi_polish(a: &mut CMatrix, v: &mut CMatrix) {
    let n = a.nrows();
    let scale = linalg::max_abs(a).max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, e^{-iθ}) · [[c, s], [-s, c]]
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;
                for r in 0..n {
                    let (x, y) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = x * u_pp + y * u_qp;
                    a[(r, q)] = x * u_pq + y * u_qq;
                }
                for col in 0..n {
                    let (x, y) = (a[(p, col)], a[(q, col)]);
                    a[(p, col)] = u_pp.conj() * x + u_qp.conj() * y;
                    a[(q, col)] = u_pq.conj() * x + u_qq.conj() * y;
                }
                for r in 0..v.nrows() {
                    let (x, y) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = x * u_pp + y * u_qp;
                    v[(r, q)] = x * u_pq + y * u_qq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Orthonormal basis of the momentum-n sector: one Bloch sum per translation
/// orbit whose period is compatible with k = 2πn/N.
fn momentum_basis(n_sites: usize, n: usize) -> CMatrix {
    let dim = 1usize << n_sites;
    let k = 2.0 * PI * n as f64 / n_sites as f64;
    let mut columns: Vec<CVector> = Vec::new();
    for rep in 0..dim {
        let mut orbit = vec![rep];
        let mut s = translate_index(rep, n_sites);
        while s != rep {
            orbit.push(s);
            s = translate_index(s, n_sites);
        }
        if orbit.iter().any(|&s| s < rep) {
            continue;
        }
        let period = orbit.len();
        if (n * period) % n_sites != 0 {
            continue;
        }
        let norm = 1.0 / (period as f64).sqrt();
        let mut v = CVector::zeros(dim);
        for (j, &s) in orbit.iter().enumerate() {
            v[s] = Complex64::from_polar(norm, k * j as f64);
        }
        columns.push(v);
    }
    CMatrix::from_columns(&columns)
}

fn diagonalize_by_momentum(h: &QubitOperator) -> Result<Vec<Eigenpair>> {
    let n_sites = h.n_sites();
    let mut pairs = Vec::with_capacity(h.dim());
    for n in 0..n_sites {
        let basis = momentum_basis(n_sites, n);
        if basis.ncols() == 0 {
            continue;
        }
        let block = basis.adjoint() * h.matrix() * &basis;
        for p in dense_eigenpairs(&block)? {
            pairs.push(Eigenpair {
                energy: p.energy,
                vector: &basis * p.vector,
                momentum: Some(n),
            });
        }
    }
    if pairs.len() != h.dim() {
        return Err(Error::EigenFailure(format!(
            "momentum sectors cover {} of {} states",
            pairs.len(),
            h.dim()
        )));
    }
    Ok(pairs)
}

fn largest_component(v: &CVector) -> usize {
    // first index wins among (near-)equal moduli
    let max = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0)
}

fn fix_phase(v: CVector) -> CVector {
    let z = v[largest_component(&v)];
    if z.norm() == 0.0 {
        return v;
    }
    v * (z.conj() / z.norm())
}

/// Orders eigenpairs inside each degenerate cluster deterministically.
fn order_degenerate_clusters(pairs: &mut [Eigenpair], n_sites: usize) {
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].energy - pairs[end - 1].energy < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let cluster = &mut pairs[start..end];
            if cluster.iter().all(|p| p.momentum.is_some()) {
                cluster.sort_by_key(|p| (p.momentum, largest_component(&p.vector)));
            } else {
                reorthogonalize(cluster);
                let key = |p: &Eigenpair| (chiral_overlap(&p.vector, n_sites), largest_component(&p.vector));
                cluster.sort_by(|a, b| {
                    let (oa, ia) = key(a);
                    let (ob, ib) = key(b);
                    ob.partial_cmp(&oa).unwrap_or(Ordering::Equal).then(ia.cmp(&ib))
                });
            }
        }
        start = end;
    }
}

fn chiral_overlap(v: &CVector, n_sites: usize) -> f64 {
    let device = DeviceParams {
        n_sites,
        ..DeviceParams::default()
    };
    (0..n_sites)
        .filter_map(|n| chiral_state(n, &device).ok())
        .map(|k| linalg::inner(k.amplitudes(), v).norm_sqr())
        .fold(0.0, f64::max)
}

/// Modified Gram–Schmidt inside a cluster.
fn reorthogonalize(cluster: &mut [Eigenpair]) {
    for i in 0..cluster.len() {
        for j in 0..i {
            let proj = linalg::inner(&cluster[j].vector, &cluster[i].vector);
            let prev = cluster[j].vector.clone();
            cluster[i].vector -= prev * proj;
        }
        let norm = cluster[i].vector.norm();
        if norm > 0.0 {
            cluster[i].vector /= Complex64::new(norm, 0.0);
        }
    }
}

/// Perturbative spectrum of the truncated (0 + 1 excitation) Hamiltonian.
/// Energies are measured from the empty ring |0⟩.
#[derive(Debug, Clone)]
pub struct AnalyticSpectrum {
    /// Undriven dispersion E_k = ω_q + δω_q − 2J_0 cos(k+φ) − ω_d.
    pub e_k: Vec<f64>,
    /// Ẽ_0 = −(g/Δ)² N ε_d² / Δ_q.
    pub tilde_e0: f64,
    /// Ẽ_k = E_k − ½ (g/Δ)² N ε_d² / Δ_q.
    pub tilde_e_k: Vec<f64>,
    /// |0̃⟩ ∝ |0⟩ − (g/Δ)(√N ε_d/Δ_q)|k=0⟩.
    pub tilde_ground: StateVector,
    /// |k̃⟩ ∝ |k⟩ + δ_{k,0}(g/Δ)(√N ε_d/Δ_q)|0⟩.
    pub tilde_k: Vec<StateVector>,
    /// Expansion parameter (g/Δ)(√N ε_d/Δ_q).
    pub mixing: f64,
    pub warnings: Vec<String>,
}

/// Above this expansion parameter the perturbative spectrum is flagged.
pub const PERTURBATIVE_WARN: f64 = 0.2;

pub fn analytic_spectrum(device: &DeviceParams, drive: &DriveParams) -> Result<AnalyticSpectrum> {
    let s = derived_scales(device, drive)?;
    let n = device.n_sites;
    let nf = n as f64;
    let r = device.dispersive_ratio();
    if s.delta_q == 0.0 {
        return Err(Error::PerturbationInvalid("drive resonant with the qubits (Δ_q = 0)".into()));
    }
    let mixing = r * nf.sqrt() * drive.eps_d / s.delta_q;
    if !mixing.is_finite() || mixing.abs() >= 1.0 {
        return Err(Error::PerturbationInvalid(format!(
            "expansion parameter (g/Δ)√N ε_d/Δ_q = {mixing:.3e}"
        )));
    }
    let mut warnings = Vec::new();
    if mixing.abs() > PERTURBATIVE_WARN {
        let msg = format!("expansion parameter {mixing:.3} exceeds {PERTURBATIVE_WARN}");
        warn!("{msg}");
        warnings.push(msg);
    }
    let shift = r * r * nf * drive.eps_d * drive.eps_d / s.delta_q;
    let e_k: Vec<f64> = (0..n)
        .map(|m| device.omega_q + s.lamb_shift - 2.0 * device.j0 * (device.momentum(m) + drive.phi).cos() - drive.omega_d)
        .collect();
    let tilde_e_k = e_k.iter().map(|e| e - 0.5 * shift).collect();

    let empty = ground_state(n);
    let k0 = chiral_state(0, device)?;
    let mix = Complex64::new(mixing, 0.0);
    let tilde_ground = StateVector::new(n, empty.amplitudes() - k0.amplitudes() * mix)?;
    let tilde_k = (0..n)
        .map(|m| {
            let k = chiral_state(m, device)?;
            let amps = if m == 0 {
                k.amplitudes() + empty.amplitudes() * mix
            } else {
                k.amplitudes().clone()
            };
            StateVector::new(n, amps)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AnalyticSpectrum {
        e_k,
        tilde_e0: -shift,
        tilde_e_k,
        tilde_ground,
        tilde_k,
        mixing,
        warnings,
    })
}

/// Energy of the empty ring in the convention of [`crate::operators::build_h_sigma`].
pub fn empty_ring_energy(device: &DeviceParams, drive: &DriveParams) -> Result<f64> {
    Ok(-0.5 * device.n_sites as f64 * derived_scales(device, drive)?.h_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_h_sigma;
    use approx::assert_relative_eq;

    fn system(phi: f64, eps: f64) -> (DeviceParams, DriveParams, QubitOperator, EigenSystem) {
        let device = DeviceParams::default();
        let drive = DriveParams::new(6.5, phi, eps);
        let h = build_h_sigma(&device, &drive).unwrap();
        let eig = diagonalize(&h).unwrap();
        (device, drive, h, eig)
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn eigensystem_invariants() {
        for (phi, eps) in [(0.0, 0.05), (0.7, 0.05), (PI / 3.0, 0.0), (2.0, 0.1)] {
            let (_, _, h, eig) = system(phi, eps);
            assert!(eig.residual(h.matrix()) < 1e-10 * h.max_abs());
            assert!(eig.orthonormality_error() < 1e-10);
            assert!(eig.energies().windows(2).all(|w| w[0] <= w[1] + DEGENERACY_TOL));
            for j in 0..eig.dim() {
                let v = eig.state(j);
                let z = v[largest_component(&v)];
                assert!(z.im.abs() < 1e-15 && z.re > 0.0);
            }
        }
    }

    #[test]
    fn single_excitation_block_matches_dispersion() {
        for phi in [0.0, 0.4, PI / 2.0, 5.0] {
            let (device, drive, _, eig) = system(phi, 0.0);
            let analytic = analytic_spectrum(&device, &drive).unwrap();
            let zero = empty_ring_energy(&device, &drive).unwrap();
            let exact: Vec<f64> = eig
                .energies()
                .iter()
                .zip(eig.excitation_labels())
                .filter(|(_, &l)| l == 1)
                .map(|(e, _)| e - zero)
                .collect();
            let expected = sorted(analytic.e_k.clone());
            assert_eq!(exact.len(), 3);
            for (a, b) in exact.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn decoupled_product_states() {
        let device = DeviceParams {
            j0: 0.0,
            ..DeviceParams::default()
        };
        let drive = DriveParams::new(6.5, 0.0, 0.0);
        let eig = diagonalize(&build_h_sigma(&device, &drive).unwrap()).unwrap();
        let hz = derived_scales(&device, &drive).unwrap().h_z;
        let expected = sorted((0..8).map(|s: u32| (2.0 * s.count_ones() as f64 - 3.0) * hz / 2.0).collect());
        for (a, b) in eig.energies().iter().zip(&expected) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_operator() {
        let eig = diagonalize(&QubitOperator::identity(3)).unwrap();
        assert!(eig.energies().iter().all(|&e| (e - 1.0).abs() < 1e-15));
        assert!(eig.orthonormality_error() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(8, 8);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let op = QubitOperator::from_matrix(3, m).unwrap();
        assert!(matches!(diagonalize(&op), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn translation_invariant_states_carry_momentum() {
        let (device, _, _, eig) = system(0.0, 0.05);
        assert!(eig.momentum_labels().iter().all(|m| m.is_some()));
        // zero flux: k and −k degenerate, resolved into chiral states
        for n in 1..3 {
            let idx = eig.best_overlap(&chiral_state(n, &device).unwrap());
            assert_eq!(eig.momentum_labels()[idx], Some(n));
        }
    }

    #[test]
    fn generic_path_is_deterministic() {
        // break translation symmetry with a site-local field
        let device = DeviceParams::default();
        let drive = DriveParams::new(6.5, 0.2, 0.05);
        let h = build_h_sigma(&device, &drive).unwrap();
        let z0 = crate::operators::pauli_site(crate::operators::Pauli::Z, 0, 3).unwrap();
        let op = h.add(&z0.scale(Complex64::new(1e-3, 0.0)));
        let a = diagonalize(&op).unwrap();
        let b = diagonalize(&op).unwrap();
        assert!(a.momentum_labels().iter().all(|m| m.is_none()));
        assert_eq!(a.states(), b.states());
        assert!(a.residual(op.matrix()) < 1e-10 * op.max_abs(), "{}", a.residual(op.matrix()));
    }

    #[test]
    fn analytic_unperturbed_limit() {
        let device = DeviceParams::default();
        let drive = DriveParams::new(6.5, 0.3, 0.0);
        let a = analytic_spectrum(&device, &drive).unwrap();
        assert_eq!(a.tilde_e0, 0.0);
        assert_eq!(a.tilde_e_k, a.e_k);
        assert_eq!(a.tilde_ground, ground_state(3));
    }

    #[test]
    fn analytic_ground_shift() {
        let device = DeviceParams::default();
        let drive = DriveParams::new(6.5, 0.3, 0.05);
        let a = analytic_spectrum(&device, &drive).unwrap();
        assert_relative_eq!(a.tilde_e0, -1.5e-4, epsilon = 1e-18);
        for (t, e) in a.tilde_e_k.iter().zip(&a.e_k) {
            assert_relative_eq!(t - e, -7.5e-5, epsilon = 1e-15);
        }
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn analytic_rejects_resonant_drive() {
        let device = DeviceParams::default();
        let drive = DriveParams::new(7.0, 0.3, 0.05);
        assert!(matches!(analytic_spectrum(&device, &drive), Err(Error::PerturbationInvalid(_))));
    }

    #[test]
    fn ground_admixture_matches_exact_to_first_order() {
        let device = DeviceParams::default();
        let eps = 0.002;
        let drive = DriveParams::new(6.5, 0.3, eps);
        let a = analytic_spectrum(&device, &drive).unwrap();
        let eig = diagonalize(&build_h_sigma(&device, &drive).unwrap()).unwrap();
        let k0 = chiral_state(0, &device).unwrap();
        let exact = linalg::inner(k0.amplitudes(), &eig.state(0)) / eig.state(0)[0];
        let predicted = -a.mixing;
        // first order in the mixing; h_z vs Δ_q accounts for the remainder
        assert!((exact.re - predicted).abs() < 0.03 * predicted.abs(), "{exact} vs {predicted}");
        assert!(exact.im.abs() < 1e-12);
    }

    #[test]
    fn spectrum_symmetries_without_drive() {
        let device = DeviceParams::default();
        for phi in [0.1, 0.9, 2.2] {
            let base = system(phi, 0.0).3;
            let shifted = diagonalize(
                &build_h_sigma(&device, &DriveParams::new(6.5, phi + 2.0 * PI / 3.0, 0.0)).unwrap(),
            )
            .unwrap();
            let flipped = diagonalize(&build_h_sigma(&device, &DriveParams::new(6.5, -phi, 0.0)).unwrap()).unwrap();
            for j in 0..8 {
                assert!((base.energies()[j] - shifted.energies()[j]).abs() < 1e-12);
                assert!((base.energies()[j] - flipped.energies()[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flux_reversal_with_drive() {
        let device = DeviceParams::default();
        let a = system(0.8, 0.05).3;
        let b = diagonalize(&build_h_sigma(&device, &DriveParams::new(6.5, -0.8, 0.05)).unwrap()).unwrap();
        for j in 0..8 {
            assert!((a.energies()[j] - b.energies()[j]).abs() < 1e-12);
        }
    }
}
