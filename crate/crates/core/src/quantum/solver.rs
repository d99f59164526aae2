//! QAOA proposal strategy.
//!
//! Each iteration refits the surrogate on the full history, freezes all but
//! the `m` most influential bits at the incumbent, optimizes the circuit
//! angles on the normalized sub-Hamiltonian and keeps the best distinct
//! measured configurations by surrogate score.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::fm::{fit_fm, FmModel, FmParams};
use super::optimize::optimize_angles;
use super::qubo::{fm_to_qubo, qubo_to_ising};
use super::statevector::{diagonal_energies, evolve, sample_states, QaoaCircuitSpec, MAX_QUBITS};
use super::QuantumError;
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::{self, purpose, Rng};
use crate::solvers::{
    proposal_stream, History, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec, Warmup,
};

/// The `m` bits with the largest influence `|w_i| + sum_j |<V_i, V_j>|`,
/// in ascending index order. Ties go to the lower index.
pub fn select_subproblem(fm: &FmModel, m: usize) -> Vec<usize> {
    let n = fm.n_bits();
    let score: Vec<f64> = (0..n).map(|i| fm.influence(i)).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(m.min(n));
    idx.sort_unstable();
    idx
}

pub struct QaoaSolver {
    kind: SolverKind,
    schema: Arc<FeatureSchema>,
    fm_params: FmParams,
    depth: usize,
    shots: usize,
    qubits: usize,
    optimizer_evals: usize,
    seed_path: [u64; 2],
    rng: Rng,
    warmup: Warmup,
    history: History,
    pending: Pending,
    iteration: u64,
    fallbacks: usize,
}

impl QaoaSolver {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let qubits = spec.count("qubits")?;
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(QuantumError::TooManyQubits { requested: qubits, max: MAX_QUBITS }.into());
        }
        let depth = spec.count("depth")?;
        if depth == 0 {
            return Err(SolverError::BadParam("depth must be >= 1".into()));
        }
        Ok(Self {
            kind: spec.kind,
            schema: ctx.schema.clone(),
            fm_params: FmParams {
                rank: spec.count("rank")?,
                epochs: spec.count("epochs")?,
                lr: spec.param("lr"),
                ..FmParams::default()
            },
            depth,
            shots: spec.count("shots")?.max(1),
            qubits,
            optimizer_evals: spec.count("optimizer_evals")?.max(1),
            seed_path: [ctx.master_seed, seeding::name_tag(spec.kind.name())],
            rng: proposal_stream(spec, ctx),
            warmup: Warmup::new(spec),
            history: History::default(),
            pending: Pending::default(),
            iteration: 0,
            fallbacks: 0,
        })
    }

    /// Batches proposed uniformly because a surrogate step failed.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn sub_stream(&self, purpose: u64) -> Rng {
        seeding::stream(&[self.seed_path[0], self.seed_path[1], purpose, self.iteration])
    }

    fn quantum_batch(&mut self, n: usize) -> Result<Vec<BitVector>, QuantumError> {
        let data: Vec<(BitVector, f64)> =
            self.history.bits.iter().cloned().zip(self.history.risk.iter().copied()).collect();
        let fm = fit_fm(&data, &self.fm_params, &mut self.sub_stream(purpose::SURROGATE))?;
        let incumbent = self.history.best().map(|(z, _)| z.clone()).ok_or(QuantumError::EmptyHistory)?;

        let active = select_subproblem(&fm, self.qubits);
        let m = active.len();
        let ising = qubo_to_ising(&fm_to_qubo(&fm).restrict(&active, &incumbent)).normalized();
        let mut circuit = match self.kind {
            SolverKind::QaoaCorr if m >= 2 => {
                QaoaCircuitSpec::correlated(self.depth, ising.strongest_pairs(m.div_ceil(2)))
            }
            _ => QaoaCircuitSpec::standard(self.depth),
        };
        circuit.shots = self.shots;
        circuit.angles = optimize_angles(&ising, &circuit, self.optimizer_evals)?;

        let energies = diagonal_energies(&ising);
        let amps = evolve(&energies, m, &circuit);
        let shots = sample_states(&amps, circuit.shots, &mut self.sub_stream(purpose::SHOTS));

        let mut distinct: BTreeMap<usize, ()> = BTreeMap::new();
        for s in shots {
            distinct.insert(s, ());
        }
        let mut scored: Vec<(f64, usize, BitVector)> = distinct
            .into_keys()
            .map(|s| {
                let mut z = incumbent.clone();
                for (q, &bit) in active.iter().enumerate() {
                    z.set(bit, (s >> q) & 1 == 1);
                }
                (fm.predict(&z), s, z)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut out: Vec<BitVector> = scored.into_iter().take(n).map(|(_, _, z)| z).collect();
        while out.len() < n {
            out.push(self.schema.random_config(&mut self.rng));
        }
        Ok(out)
    }
}

impl Solver for QaoaSolver {
    fn kind(&self) -> SolverKind {
        self.kind
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let batch = match self.warmup.propose(n, &self.schema, &mut self.rng) {
            Some(b) => b,
            None => match self.quantum_batch(n) {
                Ok(b) => b,
                Err(_) => {
                    self.fallbacks += 1;
                    (0..n).map(|_| self.schema.random_config(&mut self.rng)).collect()
                }
            },
        };
        self.iteration += 1;
        self.pending.set(batch.into_iter().map(|z| (z, ())).collect())
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        self.history.extend(evaluations);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bits_when_m_is_n() {
        let fm = FmModel::zeros(6, 2);
        assert_eq!(select_subproblem(&fm, 6), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn dominant_linear_weight_selected() {
        let mut fm = FmModel::zeros(10, 2);
        fm.w[7] = 5.0;
        assert!(select_subproblem(&fm, 1).contains(&7));
        assert!(select_subproblem(&fm, 3).contains(&7));
    }

    #[test]
    fn planted_interaction_bits() {
        let mut fm = FmModel::zeros(12, 2);
        for i in [2, 5, 8, 11] {
            fm.v[i] = vec![1.0, 0.5];
        }
        fm.w[0] = 0.1;
        assert_eq!(select_subproblem(&fm, 4), vec![2, 5, 8, 11]);
    }
}
