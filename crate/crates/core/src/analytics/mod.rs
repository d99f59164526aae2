//! Statistics over run archives: summary columns, exclusivity, cross-temporal
//! overlap, core-mode matrices and signature counts.
//!
//! Everything here is a pure function of immutable archives. Per-run metrics
//! are averaged over seeds; set-valued analyses take the union over seeds.

mod modes;
mod report;
mod sets;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::harness::RunArchive;
use crate::schema::FeatureSchema;
use crate::solvers::SolverKind;

pub use modes::{
    core_mode_matrix, core_mode_sets, signature_census, ModeCensusRow, ModeMatrix, OverlapCell, SignatureCensus,
};
pub use report::{
    markdown_report, write_csv, write_exclusivity_csv, write_modes_csv, write_overlap_csv, write_signature_csv,
    write_summary_csv, Report,
};
pub use sets::{
    cross_temporal_overlap, exclusivity, exclusivity_curve, exclusivity_table, ExclusivityPoint, OverlapRow,
    DEFAULT_SNAPSHOTS,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("archive is empty")]
    EmptyArchive,
    #[error("archives disagree on schema: {0}")]
    SchemaMismatch(String),
    #[error("need at least {0} solvers")]
    TooFewSolvers(usize),
    #[error("no archive for `{0}`")]
    MissingSolver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Table 1 style summary of one archive, or the seed average of several.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub rare: f64,
    pub t10_mu: f64,
    pub t10_sd: f64,
    pub unique_layouts: usize,
    pub auc: f64,
    pub hamming: f64,
    pub entropy: f64,
}

/// Population mean and standard deviation, shifted by the first element.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let x0 = xs[0];
    let shift = xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - x0 - shift).powi(2)).sum::<f64>() / n;
    (x0 + shift, var.sqrt())
}

/// Normalized area under the running maximum: `(1/B) sum_t runmax(t) / runmax(B)`.
pub fn cumulative_max_auc(risks: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let run: Vec<f64> = risks
        .iter()
        .map(|&r| {
            best = best.max(r);
            best
        })
        .collect();
    let last = *run.last().unwrap_or(&0.0);
    if last <= 0.0 {
        return 1.0;
    }
    run.iter().map(|r| r / last).sum::<f64>() / run.len() as f64
}

/// Mean normalized Hamming distance over all unordered pairs, from per-bit
/// one counts.
pub fn hamming_diversity<'a>(bits: impl IntoIterator<Item = &'a crate::BitVector>) -> f64 {
    let mut ones: Vec<u64> = Vec::new();
    let mut b = 0u64;
    for z in bits {
        if ones.is_empty() {
            ones = vec![0; z.len()];
        }
        for (c, bit) in ones.iter_mut().zip(z.iter()) {
            *c += bit as u64;
        }
        b += 1;
    }
    if b < 2 || ones.is_empty() {
        return 0.0;
    }
    let disagreements: f64 = ones.iter().map(|&c| (c * (b - c)) as f64).sum();
    disagreements / (ones.len() as f64 * (b * (b - 1) / 2) as f64)
}

/// Mean over non-fixed features of the Shannon entropy (nats) of their
/// decoded values.
pub fn feature_entropy(archive: &RunArchive, schema: &FeatureSchema) -> f64 {
    let free: Vec<&str> = schema.features().iter().filter(|f| !f.is_fixed()).map(|f| f.name.as_str()).collect();
    if free.is_empty() || archive.is_empty() {
        return 0.0;
    }
    let n = archive.len() as f64;
    let total: f64 = free
        .iter()
        .map(|name| {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for e in archive.evaluations() {
                *counts.entry(e.features.get(name).unwrap_or(0)).or_default() += 1;
            }
            counts
                .values()
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.ln()
                })
                .sum::<f64>()
        })
        .sum();
    total / free.len() as f64
}

/// Number of distinct decoded feature assignments.
pub fn unique_layouts(archive: &RunArchive) -> usize {
    archive.evaluations().map(|e| &e.features).collect::<HashSet<_>>().len()
}

pub fn summary_stats(archive: &RunArchive, schema: &FeatureSchema) -> Result<SummaryRow, AnalyticsError> {
    if archive.is_empty() {
        return Err(AnalyticsError::EmptyArchive);
    }
    if archive.n_bits != schema.total_bits() {
        return Err(AnalyticsError::SchemaMismatch(format!(
            "archive has {} bits, schema `{}` has {}",
            archive.n_bits,
            schema.name(),
            schema.total_bits()
        )));
    }
    let risks: Vec<f64> = archive.evaluations().map(|e| e.risk).collect();
    let rarity: Vec<f64> = archive.evaluations().map(|e| e.rarity).collect();
    let (mean, std) = mean_std(&risks);
    let mut sorted = risks.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = risks.len().div_ceil(10);
    let (t10_mu, t10_sd) = mean_std(&sorted[..top]);
    Ok(SummaryRow {
        max: sorted[0],
        mean,
        std,
        rare: mean_std(&rarity).0,
        t10_mu,
        t10_sd,
        unique_layouts: unique_layouts(archive),
        auc: cumulative_max_auc(&risks),
        hamming: hamming_diversity(archive.evaluations().map(|e| &e.bits)),
        entropy: feature_entropy(archive, schema),
    })
}

/// Field-wise mean; unique layouts are rounded to the nearest integer.
pub fn average_rows(rows: &[SummaryRow]) -> Option<SummaryRow> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&SummaryRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(SummaryRow {
        max: avg(|r| r.max),
        mean: avg(|r| r.mean),
        std: avg(|r| r.std),
        rare: avg(|r| r.rare),
        t10_mu: avg(|r| r.t10_mu),
        t10_sd: avg(|r| r.t10_sd),
        unique_layouts: avg(|r| r.unique_layouts as f64).round() as usize,
        auc: avg(|r| r.auc),
        hamming: avg(|r| r.hamming),
        entropy: avg(|r| r.entropy),
    })
}

/// One summary row per solver, averaged over its seeds, in solver order.
pub fn summary_table(
    archives: &[RunArchive],
    schema: &FeatureSchema,
) -> Result<Vec<(SolverKind, usize, SummaryRow)>, AnalyticsError> {
    let mut per: BTreeMap<SolverKind, Vec<SummaryRow>> = BTreeMap::new();
    for a in archives {
        per.entry(a.solver).or_default().push(summary_stats(a, schema)?);
    }
    Ok(per.into_iter().map(|(k, rows)| (k, rows.len(), average_rows(&rows).expect("non-empty"))).collect())
}

pub(crate) fn check_same_schema<'a>(archives: impl IntoIterator<Item = &'a RunArchive>) -> Result<(), AnalyticsError> {
    let mut first: Option<(&str, usize)> = None;
    for a in archives {
        match first {
            None => first = Some((&a.schema, a.n_bits)),
            Some((s, n)) if s != a.schema || n != a.n_bits => {
                return Err(AnalyticsError::SchemaMismatch(format!(
                    "`{s}` ({n} bits) vs `{}` ({} bits)",
                    a.schema, a.n_bits
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}
