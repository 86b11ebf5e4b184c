//! Nonequilibrium steady states of a driven-dissipative ring of qubits under
//! a synthetic magnetic flux.
//!
//! The pipeline for one drive setting (ω_d, φ):
//!
//! 1. [`operators::build_h_sigma`] builds the rotating-frame qubit Hamiltonian
//!    on the full 2^N space and [`spectrum::diagonalize`] diagonalizes it.
//! 2. [`rates::pump_rates_full`] computes cavity-assisted Fermi Golden Rule
//!    rates between all eigenstates; [`rates::dissipative_jumps`] adds qubit
//!    decay and dephasing.
//! 3. [`steadystate`] finds the steady state, either from secular rate
//!    equations or from the null space of the full Liouvillian.
//! 4. [`observables`] extracts the permanent current and the chiral
//!    populations n_k.
//!
//! [`sweep`] maps this over a (ω_d, φ) grid, in parallel when the `parallel`
//! feature is enabled.

pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod operators;
pub mod rates;
pub mod spectrum;
pub mod steadystate;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{DeviceParams, DriveParams};
