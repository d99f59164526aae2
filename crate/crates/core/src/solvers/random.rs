//! Uniform random search.

use super::{proposal_stream, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;
use std::sync::Arc;

pub struct RandomSearch {
    schema: Arc<FeatureSchema>,
    rng: Rng,
    pending: Pending,
    observed: usize,
}

impl RandomSearch {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Self {
        Self { schema: ctx.schema.clone(), rng: proposal_stream(spec, ctx), pending: Pending::default(), observed: 0 }
    }

    pub fn observed(&self) -> usize {
        self.observed
    }
}

impl Solver for RandomSearch {
    fn kind(&self) -> SolverKind {
        SolverKind::Random
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let batch = (0..n).map(|_| (self.schema.random_config(&mut self.rng), ())).collect();
        self.pending.set(batch)
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        self.observed += evaluations.len();
        Ok(())
    }
}
