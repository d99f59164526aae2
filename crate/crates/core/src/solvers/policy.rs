//! Policy-gradient search over independent per-bit Bernoulli logits.

use std::sync::Arc;

use super::{proposal_stream, sigmoid, Pending, Solver, SolverContext, SolverError, SolverKind, SolverSpec, Warmup};
use crate::oracle::Evaluation;
use crate::schema::{BitVector, FeatureSchema};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Vanilla policy gradient with an exponential-moving-average baseline.
    Reinforce { baseline_decay: f64 },
    /// One clipped-surrogate step per batch with a batch-mean baseline.
    Ppo { clip: f64, entropy_coef: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    pub lr: f64,
    pub logit_clamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliPolicy {
    pub logits: Vec<f64>,
    /// EMA baseline for REINFORCE; set from the first batch mean.
    pub baseline: Option<f64>,
}

impl BernoulliPolicy {
    pub fn uniform(n_bits: usize) -> Self {
        Self { logits: vec![0.0; n_bits], baseline: None }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.logits.iter().map(|&t| sigmoid(t)).collect()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> BitVector {
        BitVector::new(self.logits.iter().map(|&t| rng.random::<f64>() < sigmoid(t)).collect())
    }

    /// Sum of per-bit Bernoulli entropies, in nats.
    pub fn entropy(&self) -> f64 {
        self.probs()
            .iter()
            .map(|&p| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.ln() - (1.0 - p) * (1.0 - p).ln() })
            .sum()
    }
}

fn log_prob(z: &BitVector, probs: &[f64]) -> f64 {
    z.iter().zip(probs).map(|(b, &p)| if b { p.ln() } else { (1.0 - p).ln() }).sum()
}

/// One policy update from a batch of samples and their rewards.
///
/// `behavior` holds the per-bit probabilities the batch was drawn from; it
/// is only used by the PPO ratio. Gradients are summed over the batch.
pub fn policy_update(
    policy: &mut BernoulliPolicy,
    batch_bits: &[BitVector],
    rewards: &[f64],
    behavior: &[f64],
    params: &PolicyParams,
) {
    if batch_bits.is_empty() {
        return;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let probs = policy.probs();
    let mut grad = vec![0.0; probs.len()];
    match params.kind {
        PolicyKind::Reinforce { baseline_decay } => {
            let b = *policy.baseline.get_or_insert(mean);
            for (z, &r) in batch_bits.iter().zip(rewards) {
                let adv = r - b;
                for (g, (x, &p)) in grad.iter_mut().zip(z.iter().zip(&probs)) {
                    *g += adv * (x as u8 as f64 - p);
                }
            }
            policy.baseline = Some(baseline_decay * b + (1.0 - baseline_decay) * mean);
        }
        PolicyKind::Ppo { clip, entropy_coef } => {
            for (z, &r) in batch_bits.iter().zip(rewards) {
                let adv = r - mean;
                let ratio = (log_prob(z, &probs) - log_prob(z, behavior)).exp();
                let clipped = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
                if clipped {
                    continue;
                }
                for (g, (x, &p)) in grad.iter_mut().zip(z.iter().zip(&probs)) {
                    *g += adv * ratio * (x as u8 as f64 - p);
                }
            }
            if entropy_coef != 0.0 {
                // d/dθ of the per-bit entropy is -θ p (1 - p); one bonus per sample
                for (g, (&t, &p)) in grad.iter_mut().zip(policy.logits.iter().zip(&probs)) {
                    *g += n * entropy_coef * (-t * p * (1.0 - p));
                }
            }
        }
    }
    for (t, g) in policy.logits.iter_mut().zip(grad) {
        *t = (*t + params.lr * g).clamp(-params.logit_clamp, params.logit_clamp);
    }
}

pub struct PolicySolver {
    kind: SolverKind,
    schema: Arc<FeatureSchema>,
    params: PolicyParams,
    policy: BernoulliPolicy,
    rng: Rng,
    warmup: Warmup,
    behavior: Vec<f64>,
    pending: Pending,
}

impl PolicySolver {
    pub fn new(spec: &SolverSpec, ctx: &SolverContext) -> Result<Self, SolverError> {
        let (kind, lr) = match spec.kind {
            SolverKind::Reinforce => {
                (PolicyKind::Reinforce { baseline_decay: spec.probability("baseline_decay")? }, spec.param("alpha"))
            }
            SolverKind::PpoRisk | SolverKind::PpoDiv => (
                PolicyKind::Ppo { clip: spec.param("clip"), entropy_coef: spec.param("entropy_coef") },
                spec.param("lr"),
            ),
            other => return Err(SolverError::UnknownKind(other.name().into())),
        };
        let logit_clamp = spec.param("logit_clamp");
        if logit_clamp <= 0.0 {
            return Err(SolverError::BadParam("logit_clamp must be positive".into()));
        }
        Ok(Self {
            kind: spec.kind,
            schema: ctx.schema.clone(),
            params: PolicyParams { kind, lr, logit_clamp },
            policy: BernoulliPolicy::uniform(ctx.n_bits()),
            rng: proposal_stream(spec, ctx),
            warmup: Warmup::new(spec),
            behavior: Vec::new(),
            pending: Pending::default(),
        })
    }

    pub fn policy(&self) -> &BernoulliPolicy {
        &self.policy
    }
}

impl Solver for PolicySolver {
    fn kind(&self) -> SolverKind {
        self.kind
    }

    fn propose(&mut self, n: usize) -> Vec<BitVector> {
        let batch = match self.warmup.propose(n, &self.schema, &mut self.rng) {
            Some(b) => {
                self.behavior = vec![0.5; self.schema.total_bits()];
                b
            }
            None => {
                self.behavior = self.policy.probs();
                (0..n).map(|_| self.policy.sample(&mut self.rng)).collect()
            }
        };
        self.pending.set(batch.into_iter().map(|z| (z, ())).collect())
    }

    fn observe(&mut self, evaluations: &[Evaluation]) -> Result<(), SolverError> {
        self.pending.take(evaluations)?;
        let bits: Vec<BitVector> = evaluations.iter().map(|e| e.bits.clone()).collect();
        let rewards: Vec<f64> = evaluations.iter().map(|e| e.risk).collect();
        policy_update(&mut self.policy, &bits, &rewards, &self.behavior, &self.params);
        Ok(())
    }
}
