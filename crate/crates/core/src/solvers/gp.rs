//! Gaussian-process Bayesian optimization on the hypercube.
//!
//! Kernel `k(a, b) = s² exp(-H(a, b) / (2 l²))` with `H` the Hamming distance.
//! Acquisition is maximized over a finite pool of random configurations and
//! one-bit mutants of the current leaders.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{proposal_stream, History, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec, Warmup};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub length_scale: f64,
    /// Observation noise variance, in standardized units when `normalize_y`.
    pub noise: f64,
    /// Standardize targets before fitting.
    pub normalize_y: bool,
}

impl Default for GpParams {
    fn default() -> Self {
        Self { length_scale: 2.0, noise: 1e-3, normalize_y: true }
    }
}

const JITTER: [f64; 7] = [0.0, 1e-12, 1e-10, 1e-8, 1e-7, 1e-6, 1e-5];

/// Fitted GP posterior.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    words: Vec<Vec<u64>>,
    table: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

fn hamming_words(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

/// Exact GP fit with escalating diagonal jitter.
pub fn gp_fit(x: &[BitVector], y: &[f64], params: &GpParams) -> Result<GpPosterior, SolverError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(SolverError::EmptyHistory);
    }
    let n = x.len();
    let n_bits = x[0].len();
    let table: Vec<f64> =
        (0..=n_bits).map(|h| (-(h as f64) / (2.0 * params.length_scale * params.length_scale)).exp()).collect();
    let words: Vec<Vec<u64>> = x.iter().map(BitVector::words).collect();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_scale = if params.normalize_y {
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    } else {
        1.0
    };
    let target = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));

    let k = DMatrix::from_fn(n, n, |i, j| table[hamming_words(&words[i], &words[j])]);
    for jitter in JITTER {
        let mut kn = k.clone();
        for i in 0..n {
            kn[(i, i)] += params.noise + jitter;
        }
        if let Some(chol) = Cholesky::new(kn) {
            let alpha = chol.solve(&target);
            if alpha.iter().all(|v| v.is_finite()) {
                return Ok(GpPosterior { words, table, chol, alpha, y_mean, y_scale });
            }
        }
    }
    Err(SolverError::SingularKernel)
}

impl GpPosterior {
    fn kvec(&self, z: &[u64]) -> DVector<f64> {
        DVector::from_iterator(self.words.len(), self.words.iter().map(|w| self.table[hamming_words(w, z)]))
    }

    /// Posterior mean and latent variance at `z`.
    pub fn predict(&self, z: &BitVector) -> (f64, f64) {
        let ks = self.kvec(&z.words());
        let mu = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("factor has a nonzero diagonal");
        let var = (1.0 - v.norm_squared()).max(0.0);
        (self.y_mean + self.y_scale * mu, self.y_scale * self.y_scale * var)
    }

    /// Batched prediction, parallel over chunks of queries.
    pub fn predict_many(&self, zs: &[BitVector]) -> Vec<(f64, f64)> {
        zs.par_chunks(64)
            .flat_map_iter(|chunk| {
                let ks = DMatrix::from_fn(self.words.len(), chunk.len(), |i, j| {
                    self.table[hamming_words(&self.words[i], &chunk[j].words())]
                });
                let mu = ks.transpose() * &self.alpha;
                let v = self.chol.l().solve_lower_triangular(&ks).expect("factor has a nonzero diagonal");
                (0..chunk.len())
                    .map(|j| {
                        let var = (1.0 - v.column(j).norm_squared()).max(0.0);
                        (self.y_mean + self.y_scale * mu[j], self.y_scale * self.y_scale * var)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Prior variance in target units.
    pub fn prior_variance(&self) -> f64 {
        self.y_scale * self.y_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquisition {
    ExpectedImprovement,
    UpperConfidenceBound { kappa: f64 },
}

/// Expected improvement over `incumbent` for maximization.
pub fn expected_improvement(mu: f64, sigma: f64, incumbent: f64) -> f64 {
    let gain = mu - incumbent;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let u = gain / sigma;
    let n = Normal::standard();
    gain * n.cdf(u) + sigma * n.pdf(u)
}

pub fn upper_confidence_bound(mu: f64, sigma: f64, kappa: f64) -> f64 {
    mu + kappa * sigma
}

/// Acquisition value from a posterior mean and standard deviation.
pub fn acquisition(mu: f64, sigma: f64, kind: Acquisition, incumbent: f64) -> f64 {
    match kind {
        Acquisition::ExpectedImprovement => expected_improvement(mu, sigma, incumbent),
        Acquisition::UpperConfidenceBound { kappa } => upper_confidence_bound(mu, sigma, kappa),
    }
}

pub struct GpSolver {
    kind: SolverKind,
    schema: Arc<FeatureSchema>,
    params: GpParams,
    acquisition: Acquisition,
    max_train: usize,
    pool_random: usize,
    pool_mutants: usize,
    mutant_parents: usize,
    rng: Rng,
    warmup: Warmup,
    history: History,
    pending: Pending,
    fallbacks: usize,
}

impl GpSolver {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let params =
            GpParams { length_scale: spec.param("length_scale"), noise: spec.param("noise"), normalize_y: true };
        if params.length_scale <= 0.0 || params.noise < 0.0 {
            return Err(SolverError::BadParam("length_scale must be > 0 and noise >= 0".into()));
        }
        let acquisition = match spec.kind {
            SolverKind::GpUcb => Acquisition::UpperConfidenceBound { kappa: spec.param("kappa") },
            _ => Acquisition::ExpectedImprovement,
        };
        Ok(Self {
            kind: spec.kind,
            schema: ctx.schema.clone(),
            params,
            acquisition,
            max_train: spec.count("max_train")?.max(1),
            pool_random: spec.count("pool_random")?,
            pool_mutants: spec.count("pool_mutants")?,
            mutant_parents: spec.count("mutant_parents")?.max(1),
            rng: proposal_stream(spec, ctx),
            warmup: Warmup::new(spec),
            history: History::default(),
            pending: Pending::default(),
            fallbacks: 0,
        })
    }

    /// Number of batches proposed uniformly because the fit failed.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn candidate_pool(&mut self) -> Vec<BitVector> {
        let mut pool: Vec<BitVector> =
            (0..self.pool_random).map(|_| self.schema.random_config(&mut self.rng)).collect();
        let leaders = self.history.top_indices(self.mutant_parents);
        let n_bits = self.schema.total_bits();
        for _ in 0..self.pool_mutants {
            let mut z = self.history.bits[leaders[self.rng.random_range(0..leaders.len())]].clone();
            z.flip(self.rng.random_range(0..n_bits));
            pool.push(z);
        }
        let mut seen = HashSet::with_capacity(pool.len());
        pool.retain(|z| seen.insert(z.clone()));
        pool
    }

    fn select(&mut self, n: usize) -> Vec<BitVector> {
        let start = self.history.len().saturating_sub(self.max_train);
        let posterior = match gp_fit(&self.history.bits[start..], &self.history.risk[start..], &self.params) {
            Ok(p) => p,
            Err(_) => {
                self.fallbacks += 1;
                return (0..n).map(|_| self.schema.random_config(&mut self.rng)).collect();
            }
        };
        let incumbent = self.history.best().map_or(0.0, |(_, r)| r);
        let pool = self.candidate_pool();
        let scores: Vec<f64> = posterior
            .predict_many(&pool)
            .into_iter()
            .map(|(mu, var)| acquisition(mu, var.sqrt(), self.acquisition, incumbent))
            .collect();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut out: Vec<BitVector> = order.iter().take(n).map(|&i| pool[i].clone()).collect();
        while out.len() < n {
            out.push(self.schema.random_config(&mut self.rng));
        }
        out
    }
}

impl Solver for GpSolver {
    fn kind(&self) -> SolverKind {
        self.kind
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let batch = match self.warmup.propose(n, &self.schema, &mut self.rng) {
            Some(b) => b,
            None if self.history.len() == 0 => (0..n).map(|_| self.schema.random_config(&mut self.rng)).collect(),
            None => self.select(n),
        };
        self.pending.set(batch.into_iter().map(|z| (z, ())).collect())
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        self.history.extend(evaluations);
        Ok(())
    }
}
