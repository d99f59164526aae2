//! Search strategies behind one propose/observe interface.
//!
//! A solver proposes a batch of configurations, the harness evaluates them,
//! and the solver observes the evaluations in proposal order. Surrogate and
//! learning strategies spend their first `n_init` proposals on uniform random
//! configurations; population strategies start from a uniform population.

mod anneal;
mod enumerate;
mod genetic;
mod gp;
mod map_elites;
mod policy;
mod random;
mod swarm;
mod tpe;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::oracle::Evaluation;
use crate::quantum::{QaoaSolver, QuantumError};
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::{self, purpose, Rng};

pub use anneal::{anneal_accept, temperature, SimulatedAnnealing};
pub use enumerate::{Enumerate, MAX_ENUMERATE_BITS};
pub use genetic::{ga_step, GaParams, GeneticAlgorithm};
pub use gp::{
    acquisition, expected_improvement, gp_fit, upper_confidence_bound, Acquisition, GpParams, GpPosterior, GpSolver,
};
pub use map_elites::{map_elites_insert, Elite, EliteGrid, MapElites};
pub use policy::{policy_update, BernoulliPolicy, PolicyKind, PolicyParams, PolicySolver};
pub use random::RandomSearch;
pub use swarm::{pso_update, BinaryPso, PsoParams};
pub use tpe::{tpe_propose, TpeParams, TpeSolver};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("unknown solver `{0}`")]
    UnknownKind(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("observed {got} evaluations, expected the {expected} last proposed")]
    BatchMismatch { expected: usize, got: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("kernel matrix is singular after jitter escalation")]
    SingularKernel,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverKind {
    Random,
    Sa,
    GaExplore,
    GaExploit,
    Pso,
    MapElites,
    GpEi,
    GpUcb,
    Tpe,
    Reinforce,
    PpoRisk,
    PpoDiv,
    Qaoa,
    QaoaCorr,
    /// Exhaustive scan of a small space, used as ground truth.
    Enumerate,
}

impl SolverKind {
    /// The fourteen benchmarked strategies, in report order.
    pub const ALL: [SolverKind; 14] = [
        Self::Random,
        Self::Sa,
        Self::GaExplore,
        Self::GaExploit,
        Self::Pso,
        Self::MapElites,
        Self::GpEi,
        Self::GpUcb,
        Self::Tpe,
        Self::Reinforce,
        Self::PpoRisk,
        Self::PpoDiv,
        Self::Qaoa,
        Self::QaoaCorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Sa => "sa",
            Self::GaExplore => "ga-explore",
            Self::GaExploit => "ga-exploit",
            Self::Pso => "pso",
            Self::MapElites => "map-elites",
            Self::GpEi => "gp-ei",
            Self::GpUcb => "gp-ucb",
            Self::Tpe => "tpe",
            Self::Reinforce => "reinforce",
            Self::PpoRisk => "ppo-risk",
            Self::PpoDiv => "ppo-div",
            Self::Qaoa => "qaoa",
            Self::QaoaCorr => "qaoa-corr",
            Self::Enumerate => "enumerate",
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Random => "Random",
            Self::Sa => "SA",
            Self::GaExplore => "GA-Explore",
            Self::GaExploit => "GA-Exploit",
            Self::Pso => "PSO",
            Self::MapElites => "MAP-Elites",
            Self::GpEi => "GP-EI",
            Self::GpUcb => "GP-UCB",
            Self::Tpe => "TPE",
            Self::Reinforce => "REINFORCE",
            Self::PpoRisk => "PPO-Risk",
            Self::PpoDiv => "PPO-Div",
            Self::Qaoa => "QAOA",
            Self::QaoaCorr => "QAOA-Corr",
            Self::Enumerate => "Enumerate",
        }
    }

    /// Surrogate and learning strategies open with `n_init` uniform samples.
    pub fn uses_warmup(self) -> bool {
        matches!(
            self,
            Self::GpEi
                | Self::GpUcb
                | Self::Tpe
                | Self::Reinforce
                | Self::PpoRisk
                | Self::PpoDiv
                | Self::Qaoa
                | Self::QaoaCorr
        )
    }

    pub fn default_params(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Self::Random | Self::Enumerate => &[],
            Self::Sa => &[("t0", 3.0), ("t_end", 0.05)],
            Self::GaExplore => &[("crossover", 0.9), ("mutation", 0.1), ("tournament", 2.0), ("elitism", 1.0)],
            Self::GaExploit => &[("crossover", 0.6), ("mutation", 0.01), ("tournament", 7.0), ("elitism", 1.0)],
            Self::Pso => &[("w", 0.7), ("c1", 1.5), ("c2", 1.5), ("v_max", 6.0)],
            Self::MapElites => &[("grid", 25.0), ("sigma", 0.05)],
            Self::GpEi | Self::GpUcb => &[
                ("length_scale", 2.0),
                ("noise", 1e-3),
                ("kappa", 2.0),
                ("max_train", 500.0),
                ("pool_random", 1500.0),
                ("pool_mutants", 500.0),
                ("mutant_parents", 10.0),
            ],
            Self::Tpe => &[("gamma", 0.25), ("smoothing", 1.0), ("n_candidates", 500.0)],
            Self::Reinforce => &[("alpha", 0.05), ("baseline_decay", 0.9), ("logit_clamp", 10.0)],
            Self::PpoRisk => &[("lr", 0.02), ("clip", 0.2), ("entropy_coef", 0.0), ("logit_clamp", 10.0)],
            Self::PpoDiv => &[("lr", 0.02), ("clip", 0.2), ("entropy_coef", 0.03), ("logit_clamp", 10.0)],
            Self::Qaoa | Self::QaoaCorr => &[
                ("rank", 8.0),
                ("epochs", 30.0),
                ("lr", 0.01),
                ("depth", 2.0),
                ("shots", 5000.0),
                ("qubits", 16.0),
                ("optimizer_evals", 60.0),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .iter()
            .chain(std::iter::once(&Self::Enumerate))
            .copied()
            .find(|k| k.name() == norm || k.label().to_ascii_lowercase() == norm)
            .ok_or_else(|| SolverError::UnknownKind(s.to_string()))
    }
}

impl Serialize for SolverKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SolverKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A strategy plus its fully resolved parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub params: BTreeMap<String, f64>,
    pub batch_size: usize,
    pub n_init: usize,
}

impl SolverSpec {
    pub fn new(kind: SolverKind) -> Self {
        Self { kind, params: kind.default_params(), batch_size: 50, n_init: 100 }
    }

    /// Overrides one parameter; unknown names are rejected.
    pub fn with_param(mut self, key: &str, value: f64) -> Result<Self, SolverError> {
        match self.params.get_mut(key) {
            Some(v) if value.is_finite() => {
                *v = value;
                Ok(self)
            }
            Some(_) => Err(SolverError::BadParam(format!("{key} must be finite"))),
            None => Err(SolverError::BadParam(format!("`{}` has no parameter `{key}`", self.kind))),
        }
    }

    pub fn with_batch(mut self, batch_size: usize, n_init: usize) -> Self {
        self.batch_size = batch_size;
        self.n_init = n_init;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.batch_size == 0 {
            return Err(SolverError::BadParam("batch_size must be >= 1".into()));
        }
        if !self.n_init.is_multiple_of(self.batch_size) {
            return Err(SolverError::BadParam(format!(
                "n_init {} is not a multiple of batch_size {}",
                self.n_init, self.batch_size
            )));
        }
        for key in self.params.keys() {
            if !self.kind.default_params().contains_key(key) {
                return Err(SolverError::BadParam(format!("`{}` has no parameter `{key}`", self.kind)));
            }
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    pub(crate) fn count(&self, key: &str) -> Result<usize, SolverError> {
        let v = self.param(key);
        if v < 0.0 || v.fract() != 0.0 {
            return Err(SolverError::BadParam(format!("{key} must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    pub(crate) fn probability(&self, key: &str) -> Result<f64, SolverError> {
        let v = self.param(key);
        if !(0.0..=1.0).contains(&v) {
            return Err(SolverError::BadParam(format!("{key} must lie in [0, 1], got {v}")));
        }
        Ok(v)
    }
}

/// Everything a solver needs to initialize.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub schema: Arc<FeatureSchema>,
    pub master_seed: u64,
    /// Total evaluation budget of the run.
    pub budget: usize,
}

impl SolverContext {
    pub fn new(schema: Arc<FeatureSchema>, master_seed: u64, budget: usize) -> Self {
        Self { schema, master_seed, budget }
    }

    pub fn n_bits(&self) -> usize {
        self.schema.total_bits()
    }

    /// Per-(kind, seed) stream for a purpose.
    pub fn stream(&self, kind: SolverKind, purpose: u64) -> Rng {
        seeding::stream(&[self.master_seed, seeding::name_tag(kind.name()), purpose])
    }
}

/// Per-strategy search state.
pub trait Solver: Send {
    fn kind(&self) -> SolverKind;

    /// Proposes `n` configurations. Duplicates are allowed.
    fn propose(&mut self, n: usize) -> Vec<BitVector>;

    /// Receives the evaluations of the last proposal, in order.
    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError>;

    /// Largest number of proposals the solver can make before it must see
    /// their outcomes. `None` means a full batch at once.
    fn max_chunk(&self) -> Option<usize> {
        None
    }
}

/// Builds the solver state for `spec`.
pub fn init(spec: &SolverSpec, ctx: &SolverContext) -> Result<Box<dyn Solver>, SolverError> {
    spec.validate()?;
    Ok(match spec.kind {
        SolverKind::Random => Box::new(RandomSearch::new(spec, ctx)),
        SolverKind::Enumerate => Box::new(Enumerate::new(ctx)?),
        SolverKind::Sa => Box::new(SimulatedAnnealing::new(spec, ctx)?),
        SolverKind::GaExplore | SolverKind::GaExploit => Box::new(GeneticAlgorithm::new(spec, ctx)?),
        SolverKind::Pso => Box::new(BinaryPso::new(spec, ctx)?),
        SolverKind::MapElites => Box::new(MapElites::new(spec, ctx)?),
        SolverKind::GpEi | SolverKind::GpUcb => Box::new(GpSolver::new(spec, ctx)?),
        SolverKind::Tpe => Box::new(TpeSolver::new(spec, ctx)?),
        SolverKind::Reinforce | SolverKind::PpoRisk | SolverKind::PpoDiv => Box::new(PolicySolver::new(spec, ctx)?),
        SolverKind::Qaoa | SolverKind::QaoaCorr => Box::new(QaoaSolver::new(spec, ctx)?),
    })
}

/// Uniform warmup shared by surrogate and learning strategies.
#[derive(Debug, Clone)]
pub(crate) struct Warmup {
    remaining: usize,
}

impl Warmup {
    pub fn new(spec: &SolverSpec) -> Self {
        Self { remaining: if spec.kind.uses_warmup() { spec.n_init } else { 0 } }
    }

    #[cfg(test)]
    pub fn active(&self) -> bool {
        self.remaining > 0
    }

    /// Uniform proposals while warmup lasts; `None` once it is spent.
    pub fn propose(&mut self, n: usize, schema: &FeatureSchema, rng: &mut Rng) -> Option<Vec<BitVector>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining = self.remaining.saturating_sub(n);
        Some((0..n).map(|_| schema.random_config(rng)).collect())
    }
}

/// Proposals awaiting their evaluations.
#[derive(Debug, Clone, Default)]
pub(crate) struct Pending<T = ()> {
    items: Vec<(BitVector, T)>,
}

impl<T> Pending<T> {
    pub fn set(&mut self, items: Vec<(BitVector, T)>) -> Vec<BitVector> {
        let bits = items.iter().map(|(b, _)| b.clone()).collect();
        self.items = items;
        bits
    }

    /// Pairs each evaluation with its pending payload after checking that
    /// the evaluations match the proposals one-to-one.
    pub fn take(&mut self, evaluations: &[Evaluation]) -> Result<Vec<T>, SolverError> {
        let mismatch = SolverError::BatchMismatch { expected: self.items.len(), got: evaluations.len() };
        if evaluations.len() != self.items.len() || self.items.iter().zip(evaluations).any(|((b, _), e)| *b != e.bits) {
            return Err(mismatch);
        }
        Ok(std::mem::take(&mut self.items).into_iter().map(|(_, t)| t).collect())
    }
}

/// Running record of everything a solver has observed.
#[derive(Debug, Clone, Default)]
pub(crate) struct History {
    pub bits: Vec<BitVector>,
    pub risk: Vec<f64>,
}

impl History {
    pub fn extend(&mut self, evaluations: &[Evaluation]) {
        for e in evaluations {
            self.bits.push(e.bits.clone());
            self.risk.push(e.risk);
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn best(&self) -> Option<(&BitVector, f64)> {
        self.risk
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, &r)| (&self.bits[i], r))
    }

    /// Indices of the `k` highest-risk records, best first, ties by age.
    pub fn top_indices(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.risk[b].total_cmp(&self.risk[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn proposal_stream(spec: &SolverSpec, ctx: &SolverContext) -> Rng {
    ctx.stream(spec.kind, purpose::PROPOSALS)
}
