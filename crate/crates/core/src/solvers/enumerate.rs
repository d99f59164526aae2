//! Exhaustive enumeration of small configuration spaces.

use super::{Pending, Solver, SolverContext, SolverError, SolverKind};
use crate::oracle::Evaluation;
use crate::schema::BitVector;

/// Largest width the exhaustive scan accepts.
pub const MAX_ENUMERATE_BITS: usize = 16;

/// Proposes every bit string once, in increasing binary order, then wraps.
pub struct Enumerate {
    n_bits: usize,
    next: u64,
    pending: Pending,
}

impl Enumerate {
    pub fn new(ctx: &SolverContext) -> Result<Self, SolverError> {
        let n_bits = ctx.n_bits();
        if n_bits > MAX_ENUMERATE_BITS {
            return Err(SolverError::BadParam(format!(
                "enumeration is limited to {MAX_ENUMERATE_BITS} bits, schema has {n_bits}"
            )));
        }
        Ok(Self { n_bits, next: 0, pending: Pending::default() })
    }
}

impl Solver for Enumerate {
    fn kind(&self) -> SolverKind {
        SolverKind::Enumerate
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let size = 1u64 << self.n_bits;
        let batch = (0..n)
            .map(|_| {
                let z = BitVector::from_index(self.next % size, self.n_bits);
                self.next += 1;
                (z, ())
            })
            .collect();
        self.pending.set(batch)
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations).map(drop)
    }
}
