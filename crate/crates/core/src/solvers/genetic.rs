//! Generational genetic algorithm: tournament selection, two-point
//! crossover, per-bit mutation and elitism.

use std::sync::Arc;

use super::{proposal_stream, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaParams {
    pub crossover: f64,
    pub mutation: f64,
    pub tournament: usize,
    pub elitism: usize,
}

impl GaParams {
    pub const EXPLORE: GaParams = GaParams { crossover: 0.9, mutation: 0.1, tournament: 2, elitism: 1 };
    pub const EXPLOIT: GaParams = GaParams { crossover: 0.6, mutation: 0.01, tournament: 7, elitism: 1 };

    fn from_spec(spec: &SolverSpec) -> Result<Self, SolverError> {
        let p = Self {
            crossover: spec.probability("crossover")?,
            mutation: spec.probability("mutation")?,
            tournament: spec.count("tournament")?,
            elitism: spec.count("elitism")?,
        };
        if p.tournament == 0 {
            return Err(SolverError::BadParam("tournament must be >= 1".into()));
        }
        Ok(p)
    }
}

/// Index of the fittest of `size` members drawn with replacement.
pub fn tournament_select<R: rand::Rng + ?Sized>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

fn two_point<R: rand::Rng + ?Sized>(a: &BitVector, b: &BitVector, rng: &mut R) -> (BitVector, BitVector) {
    let n = a.len();
    let (mut i, mut j) = (rng.random_range(0..=n), rng.random_range(0..=n));
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let (mut c, mut d) = (a.clone(), b.clone());
    for k in i..j {
        c.set(k, b.get(k));
        d.set(k, a.get(k));
    }
    (c, d)
}

fn mutate<R: rand::Rng + ?Sized>(z: &mut BitVector, p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    for k in 0..z.len() {
        if p >= 1.0 || rng.random::<f64>() < p {
            z.flip(k);
        }
    }
}

/// One generation. The result has the same size as `population`; the
/// first `elitism` members are the fittest parents, unchanged.
pub fn ga_step<R: rand::Rng + ?Sized>(
    population: &[BitVector],
    fitness: &[f64],
    params: &GaParams,
    rng: &mut R,
) -> Vec<BitVector> {
    let size = population.len();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    let mut next: Vec<BitVector> =
        order.iter().take(params.elitism.min(size)).map(|&i| population[i].clone()).collect();
    while next.len() < size {
        let a = &population[tournament_select(fitness, params.tournament, rng)];
        let b = &population[tournament_select(fitness, params.tournament, rng)];
        let (mut c, mut d) =
            if rng.random::<f64>() < params.crossover { two_point(a, b, rng) } else { (a.clone(), b.clone()) };
        mutate(&mut c, params.mutation, rng);
        next.push(c);
        if next.len() < size {
            mutate(&mut d, params.mutation, rng);
            next.push(d);
        }
    }
    next
}

pub struct GeneticAlgorithm {
    kind: SolverKind,
    schema: Arc<FeatureSchema>,
    params: GaParams,
    rng: Rng,
    population: Vec<BitVector>,
    fitness: Vec<f64>,
    pending: Pending,
}

impl GeneticAlgorithm {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        Ok(Self {
            kind: spec.kind,
            schema: ctx.schema.clone(),
            params: GaParams::from_spec(spec)?,
            rng: proposal_stream(spec, ctx),
            population: Vec::new(),
            fitness: Vec::new(),
            pending: Pending::default(),
        })
    }

    pub fn population(&self) -> &[BitVector] {
        &self.population
    }
}

impl Solver for GeneticAlgorithm {
    fn kind(&self) -> SolverKind {
        self.kind
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let children = if self.population.is_empty() {
            (0..n).map(|_| self.schema.random_config(&mut self.rng)).collect()
        } else {
            let mut c = ga_step(&self.population, &self.fitness, &self.params, &mut self.rng);
            // population size follows the requested batch
            while c.len() < n {
                c.push(
                    self.population[tournament_select(&self.fitness, self.params.tournament, &mut self.rng)].clone(),
                );
            }
            c.truncate(n);
            c
        };
        self.pending.set(children.into_iter().map(|z| (z, ())).collect())
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        self.population = evaluations.iter().map(|e| e.bits.clone()).collect();
        self.fitness = evaluations.iter().map(|e| e.risk).collect();
        Ok(())
    }
}
