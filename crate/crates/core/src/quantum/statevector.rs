//! Dense statevector simulation of depth-`p` QAOA.
//!
//! Basis index `s` stores qubit `q` in bit `q` of `s`; a measured 1 is the
//! binary value `x = 1`, i.e. spin `-1`.

use num_complex::Complex64;

use super::qubo::IsingModel;
use super::QuantumError;

/// Memory guard for the simulator.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixer {
    /// Transverse field `sum_i X_i`.
    Standard,
    /// Transverse field plus `X_i X_j` on the correlated pairs.
    Correlated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaCircuitSpec {
    pub depth: usize,
    pub mixer: Mixer,
    pub correlated_pairs: Vec<(usize, usize)>,
    /// `gamma_1..gamma_p` followed by `beta_1..beta_p`.
    pub angles: Vec<f64>,
    pub shots: usize,
}

impl QaoaCircuitSpec {
    pub fn standard(depth: usize) -> Self {
        Self { depth, mixer: Mixer::Standard, correlated_pairs: Vec::new(), angles: vec![0.1; 2 * depth], shots: 5000 }
    }

    pub fn correlated(depth: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self { mixer: Mixer::Correlated, correlated_pairs: pairs, ..Self::standard(depth) }
    }

    pub fn with_angles(mut self, angles: Vec<f64>) -> Self {
        self.angles = angles;
        self
    }

    pub fn validate(&self, n_qubits: usize) -> Result<(), QuantumError> {
        let bad = |m: &str| Err(QuantumError::BadSpec(m.to_string()));
        if self.depth == 0 {
            return bad("depth must be >= 1");
        }
        if self.angles.len() != 2 * self.depth {
            return bad("angles must hold 2p values");
        }
        if (self.mixer == Mixer::Correlated) == self.correlated_pairs.is_empty() {
            return bad("correlated pairs must be given exactly for the correlated mixer");
        }
        if self.correlated_pairs.iter().any(|&(a, b)| a == b || a >= n_qubits || b >= n_qubits) {
            return bad("correlated pair out of range");
        }
        if n_qubits > MAX_QUBITS {
            return Err(QuantumError::TooManyQubits { requested: n_qubits, max: MAX_QUBITS });
        }
        Ok(())
    }
}

/// Diagonal of the cost Hamiltonian over all basis states (offset excluded).
pub fn diagonal_energies(ising: &IsingModel) -> Vec<f64> {
    let m = ising.n();
    (0..1usize << m)
        .map(|s| {
            let spin = |q: usize| if (s >> q) & 1 == 1 { -1.0 } else { 1.0 };
            let lin: f64 = ising.h.iter().enumerate().map(|(q, h)| h * spin(q)).sum();
            let quad: f64 = ising.j.iter().map(|(&(a, b), j)| j * spin(a) * spin(b)).sum();
            lin + quad
        })
        .collect()
}

/// `exp(i beta P)` where `P` flips the bits in `mask`. The mixer Hamiltonian
/// is `-P` so that `|+>^m` is its ground state.
fn rotate_pairs(amps: &mut [Complex64], mask: usize, low: usize, beta: f64) {
    let (c, s) = (beta.cos(), beta.sin());
    let mis = Complex64::new(0.0, s);
    for a in 0..amps.len() {
        if a & low == 0 {
            let b = a ^ mask;
            let (x, y) = (amps[a], amps[b]);
            amps[a] = x * c + y * mis;
            amps[b] = y * c + x * mis;
        }
    }
}

/// Applies the circuit to `|+>^m` using a precomputed energy diagonal.
pub fn evolve(energies: &[f64], m: usize, spec: &QaoaCircuitSpec) -> Vec<Complex64> {
    let dim = 1usize << m;
    let mut amps = vec![Complex64::new((dim as f64).powf(-0.5), 0.0); dim];
    let (gammas, betas) = spec.angles.split_at(spec.depth);
    for (&gamma, &beta) in gammas.iter().zip(betas) {
        for (a, &e) in amps.iter_mut().zip(energies) {
            *a *= Complex64::from_polar(1.0, -gamma * e);
        }
        for q in 0..m {
            rotate_pairs(&mut amps, 1 << q, 1 << q, beta);
        }
        if spec.mixer == Mixer::Correlated {
            for &(i, j) in &spec.correlated_pairs {
                rotate_pairs(&mut amps, (1 << i) | (1 << j), 1 << i, beta);
            }
        }
    }
    amps
}

pub fn qaoa_statevector(ising: &IsingModel, spec: &QaoaCircuitSpec) -> Result<Vec<Complex64>, QuantumError> {
    spec.validate(ising.n())?;
    Ok(evolve(&diagonal_energies(ising), ising.n(), spec))
}

pub fn expectation(amps: &[Complex64], energies: &[f64]) -> f64 {
    amps.iter().zip(energies).map(|(a, e)| a.norm_sqr() * e).sum()
}

/// `<psi| H_c |psi>`, offset excluded.
pub fn qaoa_expectation(ising: &IsingModel, spec: &QaoaCircuitSpec) -> Result<f64, QuantumError> {
    spec.validate(ising.n())?;
    let e = diagonal_energies(ising);
    Ok(expectation(&evolve(&e, ising.n(), spec), &e))
}

/// I.i.d. measurements of basis-state indices.
pub fn sample_states<R: rand::Rng + ?Sized>(amps: &[Complex64], shots: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(amps.len());
    let mut acc = 0.0;
    for a in amps {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    (0..shots)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(amps.len() - 1)
        })
        .collect()
}

/// Shots from the circuit's output distribution.
pub fn qaoa_sample<R: rand::Rng + ?Sized>(
    ising: &IsingModel,
    spec: &QaoaCircuitSpec,
    rng: &mut R,
) -> Result<Vec<usize>, QuantumError> {
    Ok(sample_states(&qaoa_statevector(ising, spec)?, spec.shots, rng))
}
