//! Core risk mode sets, pairwise overlap matrices and signature counts.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::AnalyticsError;
use crate::harness::RunArchive;
use crate::oracle::CoreRiskMode;
use crate::solvers::SolverKind;

/// Shared and exclusive counts for an ordered pair (row, col).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapCell {
    pub shared: usize,
    pub row_exclusive: usize,
    pub col_exclusive: usize,
}

impl OverlapCell {
    pub fn between<T: Ord>(row: &BTreeSet<T>, col: &BTreeSet<T>) -> Self {
        let shared = row.intersection(col).count();
        Self { shared, row_exclusive: row.len() - shared, col_exclusive: col.len() - shared }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCensusRow {
    pub mode: CoreRiskMode,
    /// Names of the sets containing the mode, in matrix order.
    pub discovered_by: Vec<String>,
    /// `discovered_by.len()` over the number of sets.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    pub names: Vec<String>,
    pub sets: Vec<BTreeSet<CoreRiskMode>>,
    /// `cells[i][j]` compares set `i` (row) with set `j` (column).
    pub cells: Vec<Vec<OverlapCell>>,
    /// Fraction of opponents with strictly fewer exclusive modes in the pair.
    pub win_rates: Vec<f64>,
    pub census: Vec<ModeCensusRow>,
}

impl ModeMatrix {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn cell(&self, row: &str, col: &str) -> Option<OverlapCell> {
        Some(self.cells[self.index_of(row)?][self.index_of(col)?])
    }

    /// Distinct modes over all sets.
    pub fn total_modes(&self) -> usize {
        self.census.len()
    }
}

/// Union over seeds of the core modes each solver reached, in solver order.
pub fn core_mode_sets(archives: &[RunArchive]) -> Vec<(SolverKind, BTreeSet<CoreRiskMode>)> {
    let mut sets: BTreeMap<SolverKind, BTreeSet<CoreRiskMode>> = BTreeMap::new();
    for a in archives {
        sets.entry(a.solver).or_default().extend(a.evaluations().map(|e| e.core_mode.flatten()));
    }
    sets.into_iter().collect()
}

/// Pairwise overlap of named mode sets.
pub fn core_mode_matrix(sets: &[(String, BTreeSet<CoreRiskMode>)]) -> Result<ModeMatrix, AnalyticsError> {
    if sets.len() < 2 {
        return Err(AnalyticsError::TooFewSolvers(2));
    }
    let flat: Vec<BTreeSet<CoreRiskMode>> =
        sets.iter().map(|(_, s)| s.iter().map(CoreRiskMode::flatten).collect()).collect();
    let cells: Vec<Vec<OverlapCell>> =
        flat.par_iter().map(|row| flat.iter().map(|col| OverlapCell::between(row, col)).collect()).collect();
    let k = flat.len();
    let win_rates = (0..k)
        .map(|i| {
            let wins = (0..k).filter(|&j| j != i && cells[i][j].row_exclusive > cells[i][j].col_exclusive).count();
            wins as f64 / (k - 1) as f64
        })
        .collect();
    let names: Vec<String> = sets.iter().map(|(n, _)| n.clone()).collect();
    let all: BTreeSet<&CoreRiskMode> = flat.iter().flatten().collect();
    let census = all
        .into_iter()
        .map(|m| {
            let discovered_by: Vec<String> =
                names.iter().zip(&flat).filter(|(_, s)| s.contains(m)).map(|(n, _)| n.clone()).collect();
            ModeCensusRow { mode: m.clone(), fraction: discovered_by.len() as f64 / k as f64, discovered_by }
        })
        .collect();
    Ok(ModeMatrix { names, sets: flat, cells, win_rates, census })
}

/// Per-solver counts of evaluations with each signature bit set, summed
/// over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureCensus {
    pub components: Vec<String>,
    pub rows: Vec<(SolverKind, Vec<usize>)>,
}

pub fn signature_census(archives: &[RunArchive], components: &[String]) -> SignatureCensus {
    let mut rows: BTreeMap<SolverKind, Vec<usize>> = BTreeMap::new();
    for a in archives {
        let counts = rows.entry(a.solver).or_insert_with(|| vec![0; components.len()]);
        for e in a.evaluations() {
            for (c, on) in counts.iter_mut().zip(e.signature.iter()) {
                *c += on as usize;
            }
        }
    }
    SignatureCensus { components: components.to_vec(), rows: rows.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::harness::enumerate;
    use crate::harness::Landscape;

    fn set(labels: &[&str]) -> BTreeSet<CoreRiskMode> {
        labels.iter().map(|l| l.parse().unwrap()).collect()
    }

    const A: &str = "DENSITY:LOW | LAYOUT:NO_SPLIT";
    const B: &str = "DENSITY:HIGH | FAILURE:TABLE_TRUNCATED | LAYOUT:HARD_SPLIT";
    const C: &str = "DENSITY:MEDIUM | LAYOUT:SOFT_SPLIT";

    #[test]
    fn identical_sets() {
        let s = set(&[A, B, C]);
        let m = core_mode_matrix(&[("x".into(), s.clone()), ("y".into(), s)]).unwrap();
        assert_eq!(m.cell("x", "y").unwrap(), OverlapCell { shared: 3, row_exclusive: 0, col_exclusive: 0 });
        assert_eq!(m.win_rates, vec![0.0, 0.0]);
        assert!(m.census.iter().all(|r| r.fraction == 1.0));
    }

    #[test]
    fn win_rate_excludes_self() {
        let m = core_mode_matrix(&[
            ("big".into(), set(&[A, B, C])),
            ("mid".into(), set(&[A, B])),
            ("small".into(), set(&[A])),
        ])
        .unwrap();
        assert_eq!(m.win_rates, vec![1.0, 0.5, 0.0]);
        assert_eq!(m.cell("mid", "big").unwrap(), OverlapCell { shared: 2, row_exclusive: 0, col_exclusive: 1 });
        assert_eq!(m.total_modes(), 3);
        assert!(matches!(core_mode_matrix(&[("a".into(), set(&[A]))]), Err(AnalyticsError::TooFewSolvers(2))));
    }

    #[test]
    fn sets_are_order_invariant() {
        let o = oracle();
        let a = archive_of(&o, SolverKind::Random, 0, &configs(0..200));
        let mut rev = a.clone();
        rev.records.reverse();
        assert_eq!(core_mode_sets(&[a]), core_mode_sets(&[rev]));
    }

    #[test]
    fn census_counts_each_active_bit() {
        let o = oracle();
        let mut a = archive_of(&o, SolverKind::Random, 0, &configs(0..2));
        for r in &mut a.records {
            r.eval.signature = crate::oracle::FailureSignature(vec![false; 6]);
        }
        a.records[1].eval.signature.0[3] = true;
        a.records[1].eval.signature.0[4] = true;
        let names: Vec<String> = o.component_names().to_vec();
        let c = signature_census(&[a], &names);
        assert_eq!(c.rows[0].1, vec![0, 0, 0, 1, 1, 0]);
    }

    #[test]
    fn census_matches_brute_force_on_mini() {
        let a = enumerate(&Landscape::new("mini_8", "idp-sim-v1"), None).unwrap();
        let (o, _) = Landscape { noiseless: true, ..Landscape::new("mini_8", "idp-sim-v1") }.resolve().unwrap();
        let mut tally = vec![0usize; o.component_names().len()];
        for i in 0..256 {
            let e = o.evaluate(&crate::BitVector::from_index(i, 8), 0).unwrap();
            for (t, on) in tally.iter_mut().zip(e.signature.iter()) {
                *t += on as usize;
            }
        }
        let c = signature_census(&[a], o.component_names());
        assert_eq!(c.rows[0].1, tally);
    }
}
