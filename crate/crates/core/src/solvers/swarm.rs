//! Binary particle swarm with a sigmoid transfer function.

use std::sync::Arc;

use super::{proposal_stream, sigmoid, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity clamp; keeps the transfer probability away from 0 and 1.
    pub v_max: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self { w: 0.7, c1: 1.5, c2: 1.5, v_max: 6.0 }
    }
}

fn bit(z: &BitVector, i: usize) -> f64 {
    z.get(i) as u8 as f64
}

/// `v' = w v + c1 u1 (pbest - x) + c2 u2 (gbest - x)`, then bit `i` is set
/// with probability `sigmoid(v'_i)`.
pub fn pso_update<R: rand::Rng + ?Sized>(
    position: &BitVector,
    velocity: &[f64],
    pbest: &BitVector,
    gbest: &BitVector,
    params: &PsoParams,
    rng: &mut R,
) -> (BitVector, Vec<f64>) {
    let n = position.len();
    let mut x = BitVector::zeros(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let xi = bit(position, i);
        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
        let vi =
            (params.w * velocity[i] + params.c1 * u1 * (bit(pbest, i) - xi) + params.c2 * u2 * (bit(gbest, i) - xi))
                .clamp(-params.v_max, params.v_max);
        x.set(i, rng.random::<f64>() < sigmoid(vi));
        v.push(vi);
    }
    (x, v)
}

struct Particle {
    x: BitVector,
    v: Vec<f64>,
    best: BitVector,
    best_risk: f64,
}

pub struct BinaryPso {
    schema: Arc<FeatureSchema>,
    params: PsoParams,
    rng: Rng,
    swarm: Vec<Particle>,
    gbest: Option<(BitVector, f64)>,
    pending: Pending<Vec<f64>>,
}

impl BinaryPso {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let params =
            PsoParams { w: spec.param("w"), c1: spec.param("c1"), c2: spec.param("c2"), v_max: spec.param("v_max") };
        if params.v_max <= 0.0 {
            return Err(SolverError::BadParam("v_max must be positive".into()));
        }
        Ok(Self {
            schema: ctx.schema.clone(),
            params,
            rng: proposal_stream(spec, ctx),
            swarm: Vec::new(),
            gbest: None,
            pending: Pending::default(),
        })
    }
}

impl Solver for BinaryPso {
    fn kind(&self) -> SolverKind {
        SolverKind::Pso
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let n_bits = self.schema.total_bits();
        let batch = (0..n)
            .map(|i| match (self.swarm.get(i), &self.gbest) {
                (Some(p), Some((g, _))) => pso_update(&p.x, &p.v, &p.best, g, &self.params, &mut self.rng),
                _ => (self.schema.random_config(&mut self.rng), vec![0.0; n_bits]),
            })
            .collect();
        self.pending.set(batch)
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        let velocities = self.pending.take(evaluations)?;
        for (i, (e, v)) in evaluations.iter().zip(velocities).enumerate() {
            match self.swarm.get_mut(i) {
                Some(p) => {
                    p.x = e.bits.clone();
                    p.v = v;
                    if e.risk > p.best_risk {
                        p.best = e.bits.clone();
                        p.best_risk = e.risk;
                    }
                }
                None => self.swarm.push(Particle { x: e.bits.clone(), v, best: e.bits.clone(), best_risk: e.risk }),
            }
            if self.gbest.as_ref().is_none_or(|(_, r)| e.risk > *r) {
                self.gbest = Some((e.bits.clone(), e.risk));
            }
        }
        Ok(())
    }
}
