//! Tree-structured Parzen estimator with per-bit Bernoulli densities.

use std::sync::Arc;

use super::{proposal_stream, History, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec, Warmup};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeParams {
    pub gamma: f64,
    pub smoothing: f64,
    pub n_candidates: usize,
}

impl Default for TpeParams {
    fn default() -> Self {
        Self { gamma: 0.25, smoothing: 1.0, n_candidates: 500 }
    }
}

/// Smoothed per-bit probability of a one: `(count + a) / (n + 2a)`.
pub fn bernoulli_density(rows: &[&BitVector], n_bits: usize, smoothing: f64) -> Vec<f64> {
    let mut ones = vec![0usize; n_bits];
    for z in rows {
        for (i, b) in z.iter().enumerate() {
            ones[i] += b as usize;
        }
    }
    ones.iter().map(|&c| (c as f64 + smoothing) / (rows.len() as f64 + 2.0 * smoothing)).collect()
}

/// `sum_i log(l_i(z_i) / g_i(z_i))`.
pub fn tpe_score(z: &BitVector, l: &[f64], g: &[f64]) -> f64 {
    z.iter().zip(l.iter().zip(g)).map(|(b, (&l, &g))| if b { (l / g).ln() } else { ((1.0 - l) / (1.0 - g)).ln() }).sum()
}

/// Splits at the gamma quantile of risk, samples candidates from the good
/// density and keeps the `batch` best by density ratio.
pub fn tpe_propose<R: rand::Rng + ?Sized>(
    history: &[(BitVector, f64)],
    params: &TpeParams,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<BitVector>, SolverError> {
    let Some(n_bits) = history.first().map(|(z, _)| z.len()) else {
        return Err(SolverError::EmptyHistory);
    };
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[b].1.total_cmp(&history[a].1).then(a.cmp(&b)));
    let n_good = ((params.gamma * history.len() as f64).ceil() as usize).clamp(1, history.len());
    let good: Vec<&BitVector> = order[..n_good].iter().map(|&i| &history[i].0).collect();
    let rest: Vec<&BitVector> = order[n_good..].iter().map(|&i| &history[i].0).collect();
    let l = bernoulli_density(&good, n_bits, params.smoothing);
    let g = bernoulli_density(&rest, n_bits, params.smoothing);

    let candidates: Vec<BitVector> = (0..params.n_candidates.max(batch))
        .map(|_| BitVector::new(l.iter().map(|&p| rng.random::<f64>() < p).collect()))
        .collect();
    let scores: Vec<f64> = candidates.iter().map(|z| tpe_score(z, &l, &g)).collect();
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(idx.into_iter().take(batch).map(|i| candidates[i].clone()).collect())
}

pub struct TpeSolver {
    schema: Arc<FeatureSchema>,
    params: TpeParams,
    rng: Rng,
    warmup: Warmup,
    history: History,
    pending: Pending,
}

impl TpeSolver {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let params = TpeParams {
            gamma: spec.probability("gamma")?,
            smoothing: spec.param("smoothing"),
            n_candidates: spec.count("n_candidates")?,
        };
        if params.smoothing <= 0.0 || params.gamma == 0.0 {
            return Err(SolverError::BadParam("gamma and smoothing must be positive".into()));
        }
        Ok(Self {
            schema: ctx.schema.clone(),
            params,
            rng: proposal_stream(spec, ctx),
            warmup: Warmup::new(spec),
            history: History::default(),
            pending: Pending::default(),
        })
    }
}

impl Solver for TpeSolver {
    fn kind(&self) -> SolverKind {
        SolverKind::Tpe
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let batch = match self.warmup.propose(n, &self.schema, &mut self.rng) {
            Some(b) => b,
            None => {
                let hist: Vec<(BitVector, f64)> =
                    self.history.bits.iter().cloned().zip(self.history.risk.iter().copied()).collect();
                tpe_propose(&hist, &self.params, n, &mut self.rng)
                    .unwrap_or_else(|_| (0..n).map(|_| self.schema.random_config(&mut self.rng)).collect())
            }
        };
        self.pending.set(batch.into_iter().map(|z| (z, ())).collect())
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        self.history.extend(evaluations);
        Ok(())
    }
}
