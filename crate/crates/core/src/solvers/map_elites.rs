//! MAP-Elites over a 2-D structural descriptor grid.
//!
//! Genomes are relaxed vectors in `[0, 1]^N`, thresholded at 0.5 to bits.
//! Descriptors are the density latent and `(eta + s_hard) / 2`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use std::sync::Arc;

use super::{proposal_stream, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::oracle::{Evaluation, Latents};
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

/// Half-width of the initial genome band around the threshold.
const INIT_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub genome: Vec<f64>,
    pub bits: BitVector,
    pub risk: f64,
}

#[derive(Debug, Clone)]
pub struct EliteGrid {
    size: usize,
    cells: Vec<Option<Elite>>,
}

impl EliteGrid {
    pub fn new(size: usize) -> Self {
        Self { size, cells: vec![None; size * size] }
    }

    /// Cell of a descriptor pair in `[0, 1]^2`; the upper edge maps to the last cell.
    pub fn cell(&self, d: (f64, f64)) -> (usize, usize) {
        let idx = |x: f64| ((x.clamp(0.0, 1.0) * self.size as f64).floor() as usize).min(self.size - 1);
        (idx(d.0), idx(d.1))
    }

    pub fn get(&self, cell: (usize, usize)) -> Option<&Elite> {
        self.cells[cell.0 * self.size + cell.1].as_ref()
    }

    pub fn occupied(&self) -> impl Iterator<Item = &Elite> {
        self.cells.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.occupied().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Inserts when the cell is empty or the candidate is strictly better.
pub fn map_elites_insert(grid: &mut EliteGrid, candidate: Elite, descriptors: (f64, f64)) -> bool {
    let (i, j) = grid.cell(descriptors);
    let slot = &mut grid.cells[i * grid.size + j];
    if slot.as_ref().is_none_or(|e| candidate.risk > e.risk) {
        *slot = Some(candidate);
        true
    } else {
        false
    }
}

pub fn descriptors(latents: &Latents) -> (f64, f64) {
    (latents.d, (latents.eta + latents.s_hard) / 2.0)
}

fn threshold(genome: &[f64]) -> BitVector {
    BitVector::new(genome.iter().map(|&g| g >= 0.5).collect())
}

pub struct MapElites {
    schema: Arc<FeatureSchema>,
    rng: Rng,
    mutation: Normal<f64>,
    grid: EliteGrid,
    pending: Pending<Vec<f64>>,
}

impl MapElites {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let size = spec.count("grid")?;
        let sigma = spec.param("sigma");
        if size == 0 {
            return Err(SolverError::BadParam("grid must be >= 1".into()));
        }
        let mutation = Normal::new(0.0, sigma).map_err(|e| SolverError::BadParam(format!("sigma: {e}")))?;
        Ok(Self {
            schema: ctx.schema.clone(),
            rng: proposal_stream(spec, ctx),
            mutation,
            grid: EliteGrid::new(size),
            pending: Pending::default(),
        })
    }

    pub fn grid(&self) -> &EliteGrid {
        &self.grid
    }
}

impl Solver for MapElites {
    fn kind(&self) -> SolverKind {
        SolverKind::MapElites
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let n_bits = self.schema.total_bits();
        let elites: Vec<&Elite> = self.grid.occupied().collect();
        let batch = (0..n)
            .map(|_| {
                let genome: Vec<f64> = if elites.is_empty() {
                    (0..n_bits).map(|_| self.rng.random_range(0.5 - INIT_SPREAD..0.5 + INIT_SPREAD)).collect()
                } else {
                    let parent = elites[self.rng.random_range(0..elites.len())];
                    parent.genome.iter().map(|g| (g + self.mutation.sample(&mut self.rng)).clamp(0.0, 1.0)).collect()
                };
                (threshold(&genome), genome)
            })
            .collect();
        self.pending.set(batch)
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        let genomes = self.pending.take(evaluations)?;
        for (e, genome) in evaluations.iter().zip(genomes) {
            let latents =
                Latents::from_indices(&self.schema, self.schema.decode_indices(&e.bits).expect("width checked"));
            map_elites_insert(
                &mut self.grid,
                Elite { genome, bits: e.bits.clone(), risk: e.risk },
                descriptors(&latents),
            );
        }
        Ok(())
    }
}
