//! Simulated annealing with single-bit-flip moves and geometric cooling.
//!
//! Each budget unit is one accept/reject step, so the harness feeds this
//! solver one proposal at a time.

use rand::Rng as _;
use std::sync::Arc;

use super::{proposal_stream, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

/// Metropolis rule for maximization.
pub fn anneal_accept<R: rand::Rng + ?Sized>(delta_risk: f64, temperature: f64, rng: &mut R) -> bool {
    delta_risk >= 0.0 || rng.random::<f64>() < (delta_risk / temperature).exp()
}

/// `T_t = T0 (T_end / T0)^(t / (B - 1))`.
pub fn temperature(t: usize, budget: usize, t0: f64, t_end: f64) -> f64 {
    if budget <= 1 {
        return t0;
    }
    let frac = (t.min(budget - 1)) as f64 / (budget - 1) as f64;
    t0 * (t_end / t0).powf(frac)
}

pub struct SimulatedAnnealing {
    schema: Arc<FeatureSchema>,
    rng: Rng,
    t0: f64,
    t_end: f64,
    budget: usize,
    step: usize,
    incumbent: Option<(BitVector, f64)>,
    pending: Pending,
}

impl SimulatedAnnealing {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let (t0, t_end) = (spec.param("t0"), spec.param("t_end"));
        if !(t0 > 0.0 && t_end > 0.0) {
            return Err(SolverError::BadParam("temperatures must be positive".into()));
        }
        Ok(Self {
            schema: ctx.schema.clone(),
            rng: proposal_stream(spec, ctx),
            t0,
            t_end,
            budget: ctx.budget,
            step: 0,
            incumbent: None,
            pending: Pending::default(),
        })
    }

    pub fn incumbent(&self) -> Option<&(BitVector, f64)> {
        self.incumbent.as_ref()
    }
}

impl Solver for SimulatedAnnealing {
    fn kind(&self) -> SolverKind {
        SolverKind::Sa
    }

    fn max_chunk(&self) -> Option<usize> {
        Some(1)
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let n_bits = self.schema.total_bits();
        let batch = (0..n)
            .map(|_| match &self.incumbent {
                None => (self.schema.random_config(&mut self.rng), ()),
                Some((z, _)) => {
                    let mut c = z.clone();
                    c.flip(self.rng.random_range(0..n_bits));
                    (c, ())
                }
            })
            .collect();
        self.pending.set(batch)
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        for e in evaluations {
            let t = temperature(self.step, self.budget, self.t0, self.t_end);
            self.step += 1;
            let accept = match &self.incumbent {
                None => true,
                Some((_, r)) => anneal_accept(e.risk - r, t, &mut self.rng),
            };
            if accept {
                self.incumbent = Some((e.bits.clone(), e.risk));
            }
        }
        Ok(())
    }
}
