//! Set comparisons over discovered configurations.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::{check_same_schema, AnalyticsError};
use crate::harness::RunArchive;
use crate::schema::BitVector;
use crate::solvers::SolverKind;

pub const DEFAULT_SNAPSHOTS: [usize; 3] = [100, 500, 1000];

/// Distinct configurations among the first `t` records.
fn prefix_set(a: &RunArchive, t: usize) -> HashSet<&BitVector> {
    a.records.iter().take(t).map(|r| &r.eval.bits).collect()
}

/// `|A \ O| / |A ∪ O|`, zero when both are empty.
pub fn exclusivity<T: Eq + std::hash::Hash>(a: &HashSet<T>, others: &HashSet<T>) -> f64 {
    let own = a.difference(others).count();
    let union = own + others.len();
    if union == 0 {
        0.0
    } else {
        own as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExclusivityPoint {
    pub t: usize,
    pub excl: f64,
}

fn grid(len: usize, step: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut ts: Vec<usize> = (1..=len / step).map(|k| k * step).collect();
    if ts.last() != Some(&len) && len > 0 {
        ts.push(len);
    }
    ts
}

/// Exclusivity of `target` against the union of `others`, both cut at the
/// same budget `t` on a grid of `step`.
pub fn exclusivity_curve(
    target: &RunArchive,
    others: &[&RunArchive],
    step: usize,
) -> Result<Vec<ExclusivityPoint>, AnalyticsError> {
    check_same_schema(std::iter::once(target).chain(others.iter().copied()))?;
    Ok(grid(target.len(), step)
        .into_iter()
        .map(|t| {
            let mine = prefix_set(target, t);
            let rest: HashSet<&BitVector> = others.iter().flat_map(|o| prefix_set(o, t)).collect();
            ExclusivityPoint { t, excl: exclusivity(&mine, &rest) }
        })
        .collect())
}

/// Per-solver exclusivity curves averaged over seeds. Each seed's archive is
/// compared with the other solvers' archives of the same seed, or with all
/// of their archives when none shares the seed.
pub fn exclusivity_table(
    archives: &[RunArchive],
    step: usize,
) -> Result<Vec<(SolverKind, Vec<ExclusivityPoint>)>, AnalyticsError> {
    check_same_schema(archives)?;
    let solvers: Vec<SolverKind> =
        archives.iter().map(|a| a.solver).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if solvers.len() < 2 {
        return Err(AnalyticsError::TooFewSolvers(2));
    }
    let mut out = Vec::new();
    for kind in solvers {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for a in archives.iter().filter(|a| a.solver == kind) {
            let same_seed: Vec<&RunArchive> =
                archives.iter().filter(|o| o.solver != kind && o.seed == a.seed).collect();
            let others =
                if same_seed.is_empty() { archives.iter().filter(|o| o.solver != kind).collect() } else { same_seed };
            for p in exclusivity_curve(a, &others, step)? {
                let e = sums.entry(p.t).or_default();
                e.0 += p.excl;
                e.1 += 1;
            }
        }
        out.push((kind, sums.into_iter().map(|(t, (s, n))| ExclusivityPoint { t, excl: s / n as f64 }).collect()));
    }
    Ok(out)
}

/// One grid point of a cross-temporal comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapRow {
    pub snapshot: usize,
    pub t: usize,
    pub exclusive_a: usize,
    pub common: usize,
    pub exclusive_b: usize,
}

/// `a` frozen at each snapshot budget against the growing discoveries of `b`.
pub fn cross_temporal_overlap(
    a: &RunArchive,
    b: &RunArchive,
    snapshots: &[usize],
    step: usize,
) -> Result<Vec<OverlapRow>, AnalyticsError> {
    check_same_schema([a, b])?;
    let mut rows = Vec::new();
    for &s in snapshots {
        let za = prefix_set(a, s);
        for t in grid(b.len(), step) {
            let zb = prefix_set(b, t);
            let common = za.intersection(&zb).count();
            rows.push(OverlapRow {
                snapshot: s,
                t,
                exclusive_a: za.len() - common,
                common,
                exclusive_b: zb.len() - common,
            });
        }
    }
    Ok(rows)
}
