//! Risk prediction from configuration bits with random forests.
//!
//! Each archive is split by position: the first 70% of its records are
//! training material and the last 30% are pooled into a shared holdout.
//! Training sets are then drawn from the training material in one of four
//! modes, and holdout rows whose configuration also occurs in the training
//! set are dropped.

mod forest;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::Serialize;
use thiserror::Error;

use crate::harness::RunArchive;
use crate::schema::BitVector;
use crate::seeding::{self, purpose};
use crate::solvers::SolverKind;

pub use forest::{fit_forest, Forest, ForestParams, Tree};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("targets have zero variance")]
    ZeroVariance,
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub solver: SolverKind,
    pub seed: u64,
    pub iter: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub x: Vec<BitVector>,
    pub y: Vec<f64>,
    pub provenance: Vec<Option<Provenance>>,
}

impl Dataset {
    /// Rows without provenance.
    pub fn unlabeled(x: Vec<BitVector>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        let provenance = vec![None; x.len()];
        Self { x, y, provenance }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_bits(&self) -> usize {
        self.x.first().map_or(0, BitVector::len)
    }

    fn push(&mut self, archive: &RunArchive, i: usize) {
        let r = &archive.records[i];
        self.x.push(r.eval.bits.clone());
        self.y.push(r.eval.risk);
        self.provenance.push(Some(Provenance { solver: archive.solver, seed: archive.seed, iter: r.iter }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    /// The training records of one solver.
    PerMethod(SolverKind),
    /// A uniform sample over every solver's training records.
    PortfolioRandom,
    /// A uniform sample over the early window of every solver.
    PortfolioEarly,
    /// Every training record.
    Full,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PerMethod(k) => write!(f, "per_method:{k}"),
            Self::PortfolioRandom => f.write_str("portfolio_random"),
            Self::PortfolioEarly => f.write_str("portfolio_early"),
            Self::Full => f.write_str("full"),
        }
    }
}

impl FromStr for SplitMode {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "portfolio_random" => Self::PortfolioRandom,
            "portfolio_early" => Self::PortfolioEarly,
            "full" => Self::Full,
            _ => match s.strip_prefix("per_method:") {
                Some(k) => Self::PerMethod(
                    k.parse().map_err(|_| PredictorError::BadParams(format!("unknown solver in `{s}`")))?,
                ),
                None => return Err(PredictorError::BadParams(format!("unknown split mode `{s}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitParams {
    /// Leading fraction of each archive used for training.
    pub train_fraction: f64,
    /// Training size of the per-method and portfolio modes.
    pub train_size: usize,
    /// Zero-based record window of the early portfolio.
    pub early: (usize, usize),
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self { train_fraction: 0.7, train_size: 700, early: (100, 300), seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub holdout: Dataset,
    /// Holdout rows removed because their configuration is in `train`.
    pub dropped: usize,
}

fn sample(pool: Vec<(usize, usize)>, k: usize, params: &SplitParams, mode: SplitMode) -> Vec<(usize, usize)> {
    let mut rng = seeding::stream(&[params.seed, purpose::SPLITS, seeding::name_tag(&mode.to_string())]);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Builds the training set for `mode` and the shared holdout. Expects at
/// most one archive per solver.
pub fn build_training_splits(
    archives: &[RunArchive],
    mode: SplitMode,
    params: &SplitParams,
) -> Result<Splits, PredictorError> {
    let mut seen = HashSet::new();
    if archives.is_empty() || !archives.iter().all(|a| seen.insert(a.solver)) {
        return Err(PredictorError::InsufficientData("need exactly one archive per solver".into()));
    }
    let cut = |a: &RunArchive| (a.len() as f64 * params.train_fraction).round() as usize;

    let mut holdout = Dataset::default();
    for a in archives {
        for i in cut(a)..a.len() {
            holdout.push(a, i);
        }
    }

    let chosen: Vec<(usize, usize)> = match mode {
        SplitMode::PerMethod(kind) => {
            let ai = archives
                .iter()
                .position(|a| a.solver == kind)
                .ok_or_else(|| PredictorError::InsufficientData(format!("no archive for `{kind}`")))?;
            let n = cut(&archives[ai]);
            if n < params.train_size {
                return Err(PredictorError::InsufficientData(format!(
                    "`{kind}` has {n} training records, {} requested",
                    params.train_size
                )));
            }
            (0..params.train_size).map(|i| (ai, i)).collect()
        }
        SplitMode::Full => archives.iter().enumerate().flat_map(|(ai, a)| (0..cut(a)).map(move |i| (ai, i))).collect(),
        SplitMode::PortfolioRandom | SplitMode::PortfolioEarly => {
            let pool: Vec<(usize, usize)> = archives
                .iter()
                .enumerate()
                .flat_map(|(ai, a)| {
                    let range = match mode {
                        SplitMode::PortfolioEarly => params.early.0.min(cut(a))..params.early.1.min(cut(a)),
                        _ => 0..cut(a),
                    };
                    range.map(move |i| (ai, i))
                })
                .collect();
            if pool.len() < params.train_size {
                return Err(PredictorError::InsufficientData(format!(
                    "{mode} pool has {} records, {} requested",
                    pool.len(),
                    params.train_size
                )));
            }
            sample(pool, params.train_size, params, mode)
        }
    };

    let mut train = Dataset::default();
    for (ai, i) in chosen {
        train.push(&archives[ai], i);
    }
    let in_train: HashSet<&BitVector> = train.x.iter().collect();
    let keep: Vec<bool> = holdout.x.iter().map(|z| !in_train.contains(z)).collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    let mut kept = Dataset::default();
    for (k, ((x, y), p)) in keep.iter().zip(holdout.x.into_iter().zip(holdout.y).zip(holdout.provenance)) {
        if *k {
            kept.x.push(x);
            kept.y.push(y);
            kept.provenance.push(p);
        }
    }
    if train.len() < 2 || kept.len() < 2 {
        return Err(PredictorError::InsufficientData(format!(
            "{} training and {} holdout rows",
            train.len(),
            kept.len()
        )));
    }
    Ok(Splits { train, holdout: kept, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// `R^2 = 1 - SSE/SST`, mean absolute error and root mean squared error.
pub fn regression_metrics(pred: &[f64], y: &[f64]) -> Result<Metrics, PredictorError> {
    if pred.len() != y.len() || y.len() < 2 {
        return Err(PredictorError::InsufficientData(format!("{} predictions for {} targets", pred.len(), y.len())));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(PredictorError::ZeroVariance);
    }
    let sse: f64 = pred.iter().zip(y).map(|(p, v)| (p - v).powi(2)).sum();
    let mae = pred.iter().zip(y).map(|(p, v)| (p - v).abs()).sum::<f64>() / n;
    Ok(Metrics { r2: 1.0 - sse / sst, mae, rmse: (sse / n).sqrt() })
}

/// One row of a prediction report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub category: String,
    pub mode: String,
    pub train_size: usize,
    pub holdout_size: usize,
    pub dropped: usize,
    pub metrics: Metrics,
}

fn category(mode: SplitMode) -> &'static str {
    match mode {
        SplitMode::Full => "Upper Bound",
        SplitMode::PortfolioRandom | SplitMode::PortfolioEarly => "Portfolio",
        SplitMode::PerMethod(k) => match k {
            SolverKind::Random | SolverKind::Enumerate => "Baseline",
            SolverKind::Sa => "Local Search",
            SolverKind::GaExplore | SolverKind::GaExploit => "Evolutionary",
            SolverKind::Pso => "Swarm",
            SolverKind::MapElites => "QD",
            SolverKind::GpEi | SolverKind::GpUcb | SolverKind::Tpe => "Bayesian Opt",
            SolverKind::Reinforce | SolverKind::PpoRisk | SolverKind::PpoDiv => "RL",
            SolverKind::Qaoa | SolverKind::QaoaCorr => "Quantum",
        },
    }
}

fn mode_label(mode: SplitMode, train: usize) -> String {
    match mode {
        SplitMode::Full => format!("Full, N={train}"),
        SplitMode::PortfolioRandom => format!("Random, N={train}"),
        SplitMode::PortfolioEarly => format!("Early, N={train}"),
        SplitMode::PerMethod(k) => k.label().to_string(),
    }
}

/// Fits one forest per mode and scores it on that mode's holdout. Rows come
/// in the order of `modes`; per-method rows are then sorted by R^2.
pub fn prediction_report(
    archives: &[RunArchive],
    modes: &[SplitMode],
    split: &SplitParams,
    forest: &ForestParams,
) -> Result<Vec<PredictionRow>, PredictorError> {
    let mut rows = Vec::new();
    let mut per_method = BTreeMap::new();
    for &mode in modes {
        let s = build_training_splits(archives, mode, split)?;
        let f = fit_forest(&s.train, forest)?;
        let metrics = regression_metrics(&f.predict(&s.holdout.x), &s.holdout.y)?;
        let row = PredictionRow {
            category: category(mode).into(),
            mode: mode_label(mode, s.train.len()),
            train_size: s.train.len(),
            holdout_size: s.holdout.len(),
            dropped: s.dropped,
            metrics,
        };
        match mode {
            SplitMode::PerMethod(k) => {
                per_method.insert(k, row);
            }
            _ => rows.push(row),
        }
    }
    let mut methods: Vec<PredictionRow> = per_method.into_values().collect();
    methods.sort_by(|a, b| b.metrics.r2.total_cmp(&a.metrics.r2));
    rows.extend(methods);
    Ok(rows)
}

/// Writes report rows as CSV, one line per row.
pub fn write_prediction_csv(
    path: &std::path::Path,
    rows: &[PredictionRow],
) -> Result<(), crate::analytics::AnalyticsError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.category.clone(),
                r.mode.clone(),
                r.train_size.to_string(),
                r.holdout_size.to_string(),
                r.dropped.to_string(),
                r.metrics.r2.to_string(),
                r.metrics.mae.to_string(),
                r.metrics.rmse.to_string(),
            ]
        })
        .collect();
    crate::analytics::write_csv(
        path,
        &["category", "method", "train_size", "holdout_size", "dropped", "r2", "mae", "rmse"],
        &body,
    )
}
