//! Factorization-machine surrogate compiled to QUBO/Ising form and searched
//! with simulated depth-`p` QAOA.

mod fm;
mod optimize;
mod qubo;
mod solver;
mod statevector;

use thiserror::Error;

pub use fm::{fit_fm, fit_fm_traced, FmModel, FmParams};
pub use optimize::{angle_bounds, nelder_mead, optimize_angles, ANGLE_START};
pub use qubo::{fm_to_qubo, qubo_to_ising, spin, IsingModel, QuboMatrix};
pub use solver::{select_subproblem, QaoaSolver};
pub use statevector::{
    diagonal_energies, evolve, expectation, qaoa_expectation, qaoa_sample, qaoa_statevector, sample_states, Mixer,
    QaoaCircuitSpec, MAX_QUBITS,
};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("{requested} qubits requested, the simulator is limited to {max}")]
    TooManyQubits { requested: usize, max: usize },
    #[error("invalid circuit: {0}")]
    BadSpec(String),
}
