//! Lindblad generator and steady-state solvers.
//!
//! Density matrices are vectorized column-major: ρ_{ij} sits at `i + j·d`.
//! The dissipator convention is 𝒟[X]ρ = XρX† − ½{X†X, ρ}.

use log::warn;
use nalgebra::{SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::model::DeviceParams;
use crate::operators::{QubitOperator, StateVector};
use crate::rates::{local_rates, Jump, RateMatrix, TransitionStrengths};
use crate::spectrum::EigenSystem;

/// Tolerances a physical steady state must meet.
pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Largest allowed dt·‖L‖ for the RK4 integrator.
pub const MAX_STEP_PRODUCT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_sites: usize,
    matrix: CMatrix,
}

/// Trace, Hermiticity and positivity figures of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateChecks {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateChecks {
    pub fn is_valid(&self) -> bool {
        self.trace_error < TRACE_TOL && self.hermiticity_error < HERMITICITY_TOL && self.min_eigenvalue > -POSITIVITY_TOL
    }
}

impl DensityMatrix {
    pub fn new(n_sites: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self { n_sites, matrix })
    }

    pub fn pure(state: &StateVector) -> Self {
        let v = state.amplitudes();
        Self {
            n_sites: state.n_sites(),
            matrix: v * v.adjoint(),
        }
    }

    pub fn ground(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        let mut matrix = CMatrix::zeros(dim, dim);
        matrix[(0, 0)] = ONE;
        Self { n_sites, matrix }
    }

    pub fn maximally_mixed(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        Self {
            n_sites,
            matrix: CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// ρ = Σ_j p_j |v_j⟩⟨v_j| over the eigenstates of `eig`.
    pub fn from_populations(eig: &EigenSystem, populations: &[f64]) -> Result<Self> {
        if populations.len() != eig.dim() {
            return Err(Error::DimensionMismatch {
                expected: eig.dim(),
                got: populations.len(),
            });
        }
        let v = eig.states();
        let mut weighted = v.clone();
        for (j, &p) in populations.iter().enumerate() {
            weighted.column_mut(j).scale_mut(p);
        }
        Ok(Self {
            n_sites: eig.n_sites(),
            matrix: weighted * v.adjoint(),
        })
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

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.matrix)
    }

    pub fn expectation(&self, op: &QubitOperator) -> Complex64 {
        linalg::trace_product(op.matrix(), &self.matrix)
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn overlap(&self, state: &CVector) -> f64 {
        linalg::sandwich(state, &self.matrix, state).re
    }

    /// Diagonal of ρ in the eigenbasis of `eig`.
    pub fn eigenbasis_populations(&self, eig: &EigenSystem) -> Vec<f64> {
        let v = eig.states();
        let rv = &self.matrix * v;
        (0..eig.dim())
            .map(|j| linalg::inner(&v.column(j).into_owned(), &rv.column(j).into_owned()).re)
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn checks(&self) -> StateChecks {
        StateChecks {
            trace_error: (self.trace() - ONE).norm(),
            hermiticity_error: linalg::hermiticity_error(&self.matrix),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }
}

/// Lindblad generator on vectorized density matrices, assembled in some
/// orthonormal frame. When `frame` is set, column j of it is the j-th frame
/// vector in the computational basis.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    n_sites: usize,
    matrix: CMatrix,
    frame: Option<CMatrix>,
}

impl Liouvillian {
    fn empty(n_sites: usize, frame: Option<CMatrix>) -> Self {
        let d = 1usize << n_sites;
        Self {
            n_sites,
            matrix: CMatrix::zeros(d * d, d * d),
            frame,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Hilbert-space dimension d (the generator is d² × d²).
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn frame(&self) -> Option<&CMatrix> {
        self.frame.as_ref()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    /// Induced ∞-norm (max absolute row sum), an upper bound on |λ|.
    pub fn norm_inf(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|r| self.matrix.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn add_hamiltonian(&mut self, h: &CMatrix) {
        let d = self.dim();
        let mi = Complex64::new(0.0, -1.0);
        for i in 0..d {
            for k in 0..d {
                let hik = h[(i, k)];
                if hik == ZERO {
                    continue;
                }
                for j in 0..d {
                    // −iHρ
                    self.matrix[(i + j * d, k + j * d)] += mi * hik;
                    // +iρH: (ρH)_{jk} picks up ρ_{ji} H_{ik}
                    self.matrix[(j + k * d, j + i * d)] -= mi * hik;
                }
            }
        }
    }

    fn add_dissipator(&mut self, x: &CMatrix) {
        let d = self.dim();
        let half = Complex64::new(0.5, 0.0);
        let m = x.adjoint() * x;
        let nz: Vec<(usize, usize, Complex64)> = (0..d)
            .flat_map(|i| (0..d).map(move |k| (i, k)))
            .filter_map(|(i, k)| (x[(i, k)] != ZERO).then(|| (i, k, x[(i, k)])))
            .collect();
        for &(i, k, xik) in &nz {
            for &(j, l, xjl) in &nz {
                self.matrix[(i + j * d, k + l * d)] += xik * xjl.conj();
            }
        }
        for i in 0..d {
            for k in 0..d {
                let mik = m[(i, k)];
                if mik == ZERO {
                    continue;
                }
                for j in 0..d {
                    self.matrix[(i + j * d, k + j * d)] -= half * mik;
                    self.matrix[(j + k * d, j + i * d)] -= half * mik;
                }
            }
        }
    }

    /// Adds 𝒟[√rate |to⟩⟨from|] in the current frame.
    fn add_transition(&mut self, from: usize, to: usize, rate: f64) {
        if rate == 0.0 {
            return;
        }
        let d = self.dim();
        let r = Complex64::new(rate, 0.0);
        let half = Complex64::new(0.5 * rate, 0.0);
        self.matrix[(to + to * d, from + from * d)] += r;
        for j in 0..d {
            self.matrix[(from + j * d, from + j * d)] -= half;
            self.matrix[(j + from * d, j + from * d)] -= half;
        }
    }

    fn to_frame(&self, rho: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(v) => v.adjoint() * rho * v,
            None => rho.clone(),
        }
    }

    fn from_frame(&self, rho: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(v) => v * rho * v.adjoint(),
            None => rho.clone(),
        }
    }

    /// L(ρ) for ρ in the computational basis, returned in the frame.
    pub fn apply_in_frame(&self, rho: &DensityMatrix) -> CMatrix {
        let d = self.dim();
        let x = vectorize(&self.to_frame(rho.matrix()));
        let y = &self.matrix * x;
        CMatrix::from_fn(d, d, |i, j| y[i + j * d])
    }

    /// max |L(ρ)|.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        linalg::max_abs(&self.apply_in_frame(rho))
    }

    /// max over columns of |Σ_i L_{(ii), col}|, zero for a trace-preserving L.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim();
        (0..d * d)
            .map(|c| (0..d).map(|i| self.matrix[(i + i * d, c)]).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

fn vectorize(m: &CMatrix) -> CVector {
    let d = m.nrows();
    CVector::from_fn(d * d, |idx, _| m[(idx % d, idx / d)])
}

fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i + j * d])
}

/// L(ρ) = −i[H, ρ] + Σ_X 𝒟[X]ρ in the computational basis.
pub fn build_liouvillian(h: &QubitOperator, jumps: &[Jump]) -> Result<Liouvillian> {
    let n = h.n_sites();
    let mut l = Liouvillian::empty(n, None);
    l.add_hamiltonian(h.matrix());
    for jump in jumps {
        if jump.operator.n_sites() != n {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: jump.operator.dim(),
            });
        }
        if !jump.rate.is_finite() || jump.rate < 0.0 {
            return Err(Error::SolverFailure(format!("jump rate {} is not a finite non-negative number", jump.rate)));
        }
        l.add_dissipator(&jump.lindblad());
    }
    Ok(l)
}

/// Full model generator, assembled in the eigenbasis of H_σ: H is diagonal
/// there, the local jumps are rotated in, and every pump rate Γ_{m→n}
/// becomes a jump √Γ |n⟩⟨m|.
pub fn full_liouvillian(eig: &EigenSystem, jumps: &[Jump], pump: &RateMatrix) -> Result<Liouvillian> {
    let n = eig.n_sites();
    let d = eig.dim();
    if pump.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: pump.dim(),
        });
    }
    let v = eig.states();
    let mut l = Liouvillian::empty(n, Some(v.clone()));
    let h = CMatrix::from_diagonal(&CVector::from_iterator(
        d,
        eig.energies().iter().map(|&e| Complex64::new(e, 0.0)),
    ));
    l.add_hamiltonian(&h);
    for jump in jumps {
        if jump.operator.n_sites() != n {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: jump.operator.dim(),
            });
        }
        l.add_dissipator(&eig.to_eigenbasis(&jump.lindblad()));
    }
    for m in 0..d {
        for k in 0..d {
            if m != k {
                l.add_transition(m, k, pump.get(m, k));
            }
        }
    }
    Ok(l)
}

/// Relative singular-value threshold below which a direction counts as null.
const NULL_TOL: f64 = 1e-12;

/// Steady state from the smallest right singular vector of L, Hermitized and
/// trace-normalized. A null space of dimension > 1 is reported, not resolved.
pub fn steady_state_nullspace(l: &Liouvillian) -> Result<DensityMatrix> {
    let d = l.dim();
    let svd = SVD::try_new(l.matrix.clone(), false, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::SolverFailure("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::SolverFailure("SVD returned no right singular vectors".into()))?;
    let sv = &svd.singular_values;
    let s_max = sv.iter().copied().fold(0.0, f64::max);
    let null_dim = sv.iter().filter(|&&s| s <= NULL_TOL * s_max).count();
    if null_dim > 1 {
        return Err(Error::DegenerateSteadyState { dimension: null_dim });
    }
    let (j, _) = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::SolverFailure("empty generator".into()))?;
    let x: CVector = v_t.row(j).adjoint();
    let mut rho = unvectorize(&x, d);
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = linalg::trace(&rho);
    if tr.norm() < f64::EPSILON {
        return Err(Error::SolverFailure("null vector is traceless".into()));
    }
    rho /= tr;
    rho = l.from_frame(&rho);
    let out = DensityMatrix {
        n_sites: l.n_sites,
        matrix: (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0),
    };
    let min_eig = out.min_eigenvalue();
    if min_eig < -POSITIVITY_TOL {
        warn!("steady state has eigenvalue {min_eig:.3e} below -{POSITIVITY_TOL:e}");
    }
    Ok(out)
}

/// Total secular rates: pump plus local decay and dephasing.
pub fn total_rates(pump: &RateMatrix, strengths: &TransitionStrengths, device: &DeviceParams) -> Result<RateMatrix> {
    let mut total = local_rates(strengths, device)?;
    if pump.dim() != total.dim() {
        return Err(Error::DimensionMismatch {
            expected: total.dim(),
            got: pump.dim(),
        });
    }
    total.add_assign(pump);
    Ok(total)
}

/// Stationary populations of the secular master equation built from the
/// pump rates and the local jumps.
pub fn steady_state_rate_equation(eig: &EigenSystem, pump: &RateMatrix, device: &DeviceParams) -> Result<Vec<f64>> {
    let strengths = crate::rates::transition_strengths(eig);
    stationary_distribution(&total_rates(pump, &strengths, device)?)
}

/// Stationary distribution of a continuous-time Markov chain. Transient
/// states get zero weight; the single closed class is solved by GTH
/// elimination, which never subtracts.
pub fn stationary_distribution(rates: &RateMatrix) -> Result<Vec<f64>> {
    let d = rates.dim();
    if d == 0 {
        return Err(Error::SingularRateGraph("empty rate graph".into()));
    }
    let closed = closed_classes(rates);
    if closed.len() != 1 {
        return Err(Error::DegenerateSteadyState { dimension: closed.len() });
    }
    let class = &closed[0];
    let n = class.len();
    let mut q = vec![0.0; n * n];
    for (a, &m) in class.iter().enumerate() {
        for (b, &k) in class.iter().enumerate() {
            if a != b {
                q[a * n + b] = rates.get(m, k);
            }
        }
    }
    for k in (1..n).rev() {
        let s: f64 = q[k * n..k * n + k].iter().sum();
        if !(s > 0.0) {
            return Err(Error::SingularRateGraph(format!("state {} has no path back", class[k])));
        }
        for i in 0..k {
            q[i * n + k] /= s;
        }
        for i in 0..k {
            let qik = q[i * n + k];
            if qik == 0.0 {
                continue;
            }
            for j in 0..k {
                q[i * n + j] += qik * q[k * n + j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * q[i * n + k]).sum();
    }
    let total: f64 = pi.iter().sum();
    let mut p = vec![0.0; d];
    for (a, &m) in class.iter().enumerate() {
        p[m] = pi[a] / total;
    }
    Ok(p)
}

/// max_n |inflow_n − outflow_n| of a population vector.
pub fn rate_equation_residual(rates: &RateMatrix, p: &[f64]) -> f64 {
    let d = rates.dim();
    (0..d)
        .map(|n| {
            let inflow: f64 = (0..d).map(|m| p[m] * rates.get(m, n)).sum();
            (inflow - p[n] * rates.outflow(n)).abs()
        })
        .fold(0.0, f64::max)
}

/// Strongly connected components with no outgoing edge, each sorted.
fn closed_classes(rates: &RateMatrix) -> Vec<Vec<usize>> {
    let d = rates.dim();
    let comp = strongly_connected(rates);
    let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut leaves = vec![true; n_comp];
    for m in 0..d {
        for n in 0..d {
            if m != n && rates.get(m, n) > 0.0 && comp[m] != comp[n] {
                leaves[comp[m]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (s, &c) in comp.iter().enumerate() {
        if leaves[c] {
            classes[c].push(s);
        }
    }
    classes.retain(|c| !c.is_empty());
    classes.sort();
    classes
}

/// Kosaraju labelling of strongly connected components.
fn strongly_connected(rates: &RateMatrix) -> Vec<usize> {
    let d = rates.dim();
    let edge = |m: usize, n: usize| m != n && rates.get(m, n) > 0.0;
    let mut order = Vec::with_capacity(d);
    let mut seen = vec![false; d];
    for start in 0..d {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((v, next)) = stack.pop() {
            if let Some(w) = (next..d).find(|&w| !seen[w] && edge(v, w)) {
                stack.push((v, w + 1));
                seen[w] = true;
                stack.push((w, 0));
            } else {
                order.push(v);
            }
        }
    }
    let mut comp = vec![usize::MAX; d];
    let mut label = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = label;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for w in 0..d {
                if comp[w] == usize::MAX && edge(w, v) {
                    comp[w] = label;
                    stack.push(w);
                }
            }
        }
        label += 1;
    }
    comp
}

/// Sampled solution of dρ/dt = L(ρ).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Classical RK4 with step ≤ `dt`, sampled `samples` times after t = 0.
/// For a linear generator one RK4 step is the fixed matrix
/// P = Σ_{j≤4} (hL)^j / j!, so long runs use repeated squaring of P.
pub fn time_evolve(rho0: &DensityMatrix, l: &Liouvillian, t_final: f64, dt: f64, samples: usize) -> Result<Trajectory> {
    let d = l.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    if !(t_final >= 0.0) || !(dt > 0.0) || samples == 0 {
        return Err(Error::SolverFailure(format!(
            "need t_final >= 0, dt > 0 and samples > 0 (got {t_final}, {dt}, {samples})"
        )));
    }
    let product = dt * l.norm_inf();
    if product >= MAX_STEP_PRODUCT {
        return Err(Error::StepSizeTooLarge { product });
    }
    let steps_per_sample = ((t_final / (dt * samples as f64)).ceil() as u64).max(1);
    let h = t_final / (steps_per_sample as f64 * samples as f64);
    let a = &l.matrix * Complex64::new(h, 0.0);
    let id = CMatrix::identity(d * d, d * d);
    // Horner form of 1 + A + A²/2 + A³/6 + A⁴/24
    let mut step = &id + &a * Complex64::new(0.25, 0.0);
    step = &id + &a * step * Complex64::new(1.0 / 3.0, 0.0);
    step = &id + &a * step * Complex64::new(0.5, 0.0);
    step = &id + &a * step;
    let propagator = matrix_power(&step, steps_per_sample);

    let mut x = vectorize(&l.to_frame(rho0.matrix()));
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for s in 1..=samples {
        x = &propagator * x;
        let rho = l.from_frame(&unvectorize(&x, d));
        times.push(s as f64 * steps_per_sample as f64 * h);
        states.push(DensityMatrix {
            n_sites: l.n_sites,
            matrix: rho,
        });
    }
    Ok(Trajectory { times, states })
}

fn matrix_power(m: &CMatrix, mut e: u64) -> CMatrix {
    let n = m.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}
