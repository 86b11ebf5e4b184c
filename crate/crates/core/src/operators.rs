//! Many-qubit operators on the 2^N Hilbert space.
//!
//! Basis convention: site `i` is bit `i` of the basis index (site 0 is the
//! least significant bit) and a set bit means |↑⟩. The basis index of
//! |b_{N−1} … b_1 b_0⟩ is Σ_i b_i 2^i, so |0⟩ = |↓…↓⟩ is index 0 and the
//! single excitation |i⟩ is index 2^i.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector, I, ONE};
use crate::model::{derived_scales, DeviceParams, DriveParams, MAX_SITES};

/// Dense operator on the qubit Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitOperator {
    n_sites: usize,
    matrix: CMatrix,
}

impl QubitOperator {
    pub fn zeros(n_sites: usize) -> Self {
        let dim = 1 << n_sites;
        Self {
            n_sites,
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(n_sites: usize) -> Self {
        let dim = 1 << n_sites;
        Self {
            n_sites,
            matrix: CMatrix::identity(dim, dim),
        }
    }

    /// Wraps a 2^N × 2^N matrix.
    pub fn from_matrix(n_sites: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 1 << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { n_sites, matrix })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    /// ‖A − A†‖_max ≤ 1e-12 ‖A‖_max.
    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= 1e-12 * self.max_abs()
    }

    pub fn apply(&self, state: &StateVector) -> CVector {
        &self.matrix * state.amplitudes()
    }

    /// ⟨ψ|A|ψ⟩.
    pub fn expectation(&self, state: &StateVector) -> Complex64 {
        linalg::sandwich(state.amplitudes(), &self.matrix, state.amplitudes())
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            n_sites: self.n_sites,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n_sites: self.n_sites,
            matrix: &self.matrix * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n_sites: self.n_sites,
            matrix: &self.matrix + &other.matrix,
        }
    }
}

/// Unit-norm state on the 2^N Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: CVector,
}

impl StateVector {
    /// Normalizes `amps`; fails on a zero vector or wrong length.
    pub fn new(n_sites: usize, amps: CVector) -> Result<Self> {
        let dim = 1 << n_sites;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid("state", "zero or non-finite norm"));
        }
        Ok(Self {
            n_sites,
            amps: amps / Complex64::new(norm, 0.0),
        })
    }

    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        let dim = 1 << n_sites;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, limit: dim });
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Ok(Self { n_sites, amps })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        linalg::inner(&self.amps, &other.amps)
    }
}

/// The empty ring |0⟩ = |↓…↓⟩.
pub fn ground_state(n_sites: usize) -> StateVector {
    StateVector::basis(n_sites, 0).expect("index 0 always exists")
}

/// Single-site Pauli operator flavours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// σ^+ = (σ^x + iσ^y)/2, raises |↓⟩ to |↑⟩.
    Plus,
    /// σ^− = (σ^x − iσ^y)/2.
    Minus,
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites == 0 {
        return Err(invalid("n_sites", "must be positive"));
    }
    if n_sites > MAX_SITES {
        return Err(Error::TooManySites {
            n_sites,
            limit: MAX_SITES,
        });
    }
    Ok(())
}

pub fn pauli_site(kind: Pauli, site: usize, n_sites: usize) -> Result<QubitOperator> {
    check_sites(n_sites)?;
    if site >= n_sites {
        return Err(Error::IndexOutOfRange {
            index: site,
            limit: n_sites,
        });
    }
    let dim = 1usize << n_sites;
    let bit = 1usize << site;
    let mut m = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        let up = b & bit != 0;
        match kind {
            Pauli::Z => m[(b, b)] = if up { ONE } else { -ONE },
            Pauli::X => m[(b ^ bit, b)] = ONE,
            // σ^y|↓⟩ = −i|↑⟩, σ^y|↑⟩ = i|↓⟩
            Pauli::Y => m[(b ^ bit, b)] = if up { I } else { -I },
            Pauli::Plus => {
                if !up {
                    m[(b | bit, b)] = ONE;
                }
            }
            Pauli::Minus => {
                if up {
                    m[(b & !bit, b)] = ONE;
                }
            }
        }
    }
    Ok(QubitOperator { n_sites, matrix: m })
}

/// Adds `coeff · σ_a^+ σ_b^−` (a ≠ b) into `m`.
fn add_hop(m: &mut CMatrix, a: usize, b: usize, coeff: Complex64) {
    let (ba, bb) = (1usize << a, 1usize << b);
    for s in 0..m.nrows() {
        if s & bb != 0 && s & ba == 0 {
            m[((s & !bb) | ba, s)] += coeff;
        }
    }
}

/// Rotating-frame qubit Hamiltonian
/// H_σ = Σ_i (h_x σ_i^x + h_z σ_i^z)/2 − J_0 Σ_i (e^{iφ} σ_i^+ σ_{i+1}^− + h.c.)
/// on a periodic ring.
pub fn build_h_sigma(device: &DeviceParams, drive: &DriveParams) -> Result<QubitOperator> {
    let n = device.n_sites;
    check_sites(n)?;
    let scales = derived_scales(device, drive)?;
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    let half_x = Complex64::new(0.5 * scales.h_x, 0.0);
    for s in 0..dim {
        let ups = s.count_ones() as f64;
        m[(s, s)] = Complex64::new(0.5 * scales.h_z * (2.0 * ups - n as f64), 0.0);
        if scales.h_x != 0.0 {
            for i in 0..n {
                m[(s ^ (1 << i), s)] += half_x;
            }
        }
    }
    let hop = Complex64::from_polar(device.j0, drive.phi);
    for i in 0..n {
        let j = (i + 1) % n;
        add_hop(&mut m, i, j, -hop);
        add_hop(&mut m, j, i, -hop.conj());
    }
    Ok(QubitOperator { n_sites: n, matrix: m })
}

/// Bond current I_b = −iJ_0 (e^{iφ} σ_b^+ σ_{b+1}^− − h.c.).
pub fn build_current_op(bond: usize, device: &DeviceParams, drive: &DriveParams) -> Result<QubitOperator> {
    let n = device.n_sites;
    check_sites(n)?;
    if bond >= n {
        return Err(Error::IndexOutOfRange { index: bond, limit: n });
    }
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    let c = -I * Complex64::from_polar(device.j0, drive.phi);
    let j = (bond + 1) % n;
    add_hop(&mut m, bond, j, c);
    add_hop(&mut m, j, bond, c.conj());
    Ok(QubitOperator { n_sites: n, matrix: m })
}

/// Bond-averaged current (1/N) Σ_b I_b.
pub fn build_mean_current_op(device: &DeviceParams, drive: &DriveParams) -> Result<QubitOperator> {
    let n = device.n_sites;
    let mut total = build_current_op(0, device, drive)?;
    for b in 1..n {
        total = total.add(&build_current_op(b, device, drive)?);
    }
    Ok(total.scale(Complex64::new(1.0 / n as f64, 0.0)))
}

/// Total excitation number Σ_i (σ_i^z + 1)/2, diagonal in the basis.
pub fn excitation_number(n_sites: usize) -> QubitOperator {
    let dim = 1usize << n_sites;
    let mut m = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        m[(s, s)] = Complex64::new(s.count_ones() as f64, 0.0);
    }
    QubitOperator { n_sites, matrix: m }
}

/// Chiral single-excitation state |k⟩ = N^{-1/2} Σ_i e^{iki} |i⟩ with k = 2πn/N.
pub fn chiral_state(n: usize, device: &DeviceParams) -> Result<StateVector> {
    let sites = device.n_sites;
    check_sites(sites)?;
    if n >= sites {
        return Err(Error::IndexOutOfRange { index: n, limit: sites });
    }
    let k = 2.0 * PI * n as f64 / sites as f64;
    let norm = 1.0 / (sites as f64).sqrt();
    let mut amps = CVector::zeros(1 << sites);
    for i in 0..sites {
        amps[1 << i] = Complex64::from_polar(norm, k * i as f64);
    }
    Ok(StateVector { n_sites: sites, amps })
}

/// Basis index after translating every site i → i+1 (mod N).
pub fn translate_index(index: usize, n_sites: usize) -> usize {
    let mask = (1usize << n_sites) - 1;
    ((index << 1) | (index >> (n_sites - 1))) & mask
}

/// Translation operator T with T|i⟩ = |i+1⟩; T|k⟩ = e^{−ik}|k⟩.
pub fn translation(n_sites: usize) -> QubitOperator {
    let dim = 1usize << n_sites;
    let mut m = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        m[(translate_index(s, n_sites), s)] = ONE;
    }
    QubitOperator { n_sites, matrix: m }
}
