//! Per-run evaluation cache and order-preserving batch evaluation.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::oracle::{Evaluation, Oracle, OracleError};
use crate::schema::BitVector;

/// First evaluation of every configuration seen in a run.
#[derive(Debug, Clone, Default)]
pub struct EvalCache {
    map: HashMap<BitVector, Evaluation>,
    hits: usize,
    misses: usize,
}

impl EvalCache {
    pub fn get(&self, z: &BitVector) -> Option<&Evaluation> {
        self.map.get(z)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    /// Number of oracle computations made through this cache.
    pub fn misses(&self) -> usize {
        self.misses
    }
}

/// One evaluated slot of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub eval: Evaluation,
    pub cached: bool,
}

/// Evaluates `batch` in proposal order.
///
/// With a cache, a configuration seen earlier in the run or earlier in the
/// same batch is a hit and returns the stored evaluation verbatim, including
/// its render seed. Misses run in parallel on the current rayon pool.
/// Without a cache every slot is computed with its own render seed.
pub fn evaluate_batch(
    oracle: &Oracle,
    batch: &[BitVector],
    render_seeds: &[u64],
    cache: Option<&mut EvalCache>,
) -> Result<Vec<BatchEntry>, OracleError> {
    assert_eq!(batch.len(), render_seeds.len(), "one render seed per slot");

    enum Slot {
        Stored,
        Miss(usize),
        Repeat(usize),
    }

    let mut misses: Vec<usize> = Vec::new();
    let mut first_in_batch: HashMap<&BitVector, usize> = HashMap::new();
    let slots: Vec<Slot> = batch
        .iter()
        .enumerate()
        .map(|(i, z)| match cache.as_deref() {
            None => {
                misses.push(i);
                Slot::Miss(misses.len() - 1)
            }
            Some(c) if c.get(z).is_some() => Slot::Stored,
            Some(_) => match first_in_batch.get(z) {
                Some(&m) => Slot::Repeat(m),
                None => {
                    misses.push(i);
                    first_in_batch.insert(z, misses.len() - 1);
                    Slot::Miss(misses.len() - 1)
                }
            },
        })
        .collect();

    let computed: Vec<Evaluation> =
        misses.par_iter().map(|&i| oracle.evaluate(&batch[i], render_seeds[i])).collect::<Result<_, _>>()?;

    let out = slots
        .iter()
        .zip(batch)
        .map(|(slot, z)| match *slot {
            Slot::Stored => {
                let c = cache.as_deref().expect("stored slots imply a cache");
                BatchEntry { eval: c.get(z).expect("checked above").clone(), cached: true }
            }
            Slot::Miss(m) => BatchEntry { eval: computed[m].clone(), cached: false },
            Slot::Repeat(m) => BatchEntry { eval: computed[m].clone(), cached: true },
        })
        .collect::<Vec<_>>();

    if let Some(c) = cache {
        for e in &out {
            if e.cached {
                c.hits += 1;
            }
        }
        c.misses += computed.len();
        for (k, &i) in misses.iter().enumerate() {
            c.map.insert(batch[i].clone(), computed[k].clone());
        }
    }
    Ok(out)
}
