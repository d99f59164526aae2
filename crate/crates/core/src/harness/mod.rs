//! The budgeted propose / evaluate / observe loop.
//!
//! A run spends exactly `budget` oracle calls in `budget / batch_size`
//! iterations. Each iteration the solver proposes, the harness evaluates the
//! proposals through a per-run cache, appends them to the archive and hands
//! them back to the solver in proposal order. Render seeds depend only on the
//! master seed, the solver and the record index, so archives do not depend on
//! the degree of parallelism.

mod archive;
mod cache;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{Oracle, OracleError, ReferenceStats};
use crate::schema::{FeatureSchema, SchemaError};
use crate::seeding::{self, purpose};
use crate::solvers::{self, Solver, SolverContext, SolverError, SolverKind, SolverSpec};
use crate::LandscapeProfile;

pub use archive::{
    load_archive_set, load_archives, read_manifest, write_atomic, write_json, ArchiveRecord, ArchiveSet, Manifest,
    RunArchive, SuiteManifest, ARCHIVE_FORMAT, MANIFEST_FILE,
};
pub use cache::{evaluate_batch, BatchEntry, EvalCache};

pub const RENDER_POLICY: &str = "first-draw";
pub const SUITE_ERRORS_FILE: &str = "suite_errors.txt";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver proposed {got} configurations, {expected} requested")]
    ProposalCount { expected: usize, got: usize },
    #[error("suite has no solvers")]
    EmptySuite,
    #[error("bad archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Whether the error stems from the inputs rather than from execution.
    pub fn is_config(&self) -> bool {
        match self {
            Self::Config(_) | Self::Schema(_) | Self::Oracle(_) | Self::EmptySuite => true,
            Self::Solver(e) => matches!(e, SolverError::UnknownKind(_) | SolverError::BadParam(_)),
            _ => false,
        }
    }
}

/// Landscape shared by every run of a config or suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    /// Built-in schema name or path.
    pub schema: String,
    /// Built-in profile name or path.
    pub profile: String,
    /// Reference statistics file; the schema defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<PathBuf>,
    /// Disables render noise.
    #[serde(default)]
    pub noiseless: bool,
}

impl Landscape {
    pub fn new(schema: &str, profile: &str) -> Self {
        Self { schema: schema.into(), profile: profile.into(), stats: None, noiseless: false }
    }

    pub fn resolve(&self) -> Result<(Oracle, ReferenceStats), HarnessError> {
        let schema = Arc::new(FeatureSchema::resolve(&self.schema)?);
        let profile = LandscapeProfile::resolve(&self.profile)?;
        let stats = match &self.stats {
            Some(p) => ReferenceStats::from_file(p)?,
            None => ReferenceStats::default_for(&schema),
        };
        let oracle = Oracle::new(schema, profile, &stats)?;
        Ok((if self.noiseless { oracle.noiseless() } else { oracle }, stats))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub landscape: Landscape,
    pub solver: SolverSpec,
    pub budget: usize,
    pub seeds: Vec<u64>,
    /// Worker threads for oracle evaluation; 0 uses the ambient pool.
    pub parallelism: usize,
    pub cache_enabled: bool,
    /// Run directory; nothing is written when absent.
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(landscape: Landscape, solver: SolverSpec) -> Self {
        Self { landscape, solver, budget: 1000, seeds: vec![0, 1, 2], parallelism: 0, cache_enabled: true, out: None }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.solver.validate()?;
        validate_budget(&self.solver, self.budget)?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    fn manifest(&self, oracle: &Oracle, stats: &ReferenceStats) -> Manifest {
        Manifest {
            format: ARCHIVE_FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema: oracle.schema().to_document(),
            profile: oracle.profile().clone(),
            stats: stats.clone(),
            solver: self.solver.clone(),
            budget: self.budget,
            seeds: self.seeds.clone(),
            cache_enabled: self.cache_enabled,
            noiseless: self.landscape.noiseless,
            render_policy: RENDER_POLICY.into(),
        }
    }
}

fn validate_budget(spec: &SolverSpec, budget: usize) -> Result<(), HarnessError> {
    if budget == 0 || !budget.is_multiple_of(spec.batch_size) {
        return Err(HarnessError::Config(format!(
            "budget {budget} must be a positive multiple of batch size {}",
            spec.batch_size
        )));
    }
    if budget < spec.n_init {
        return Err(HarnessError::Config(format!("budget {budget} is below n_init {}", spec.n_init)));
    }
    Ok(())
}

/// Render seed of record `index` in the (solver, seed) run.
pub fn render_seed(master_seed: u64, kind: SolverKind, index: usize) -> u64 {
    seeding::mix(&[master_seed, seeding::name_tag(kind.name()), purpose::RENDER, index as u64])
}

/// Runs one seed of `spec` against `oracle` and returns its archive.
pub fn run_seed(
    oracle: &Oracle,
    spec: &SolverSpec,
    budget: usize,
    seed: u64,
    cache_enabled: bool,
) -> Result<RunArchive, HarnessError> {
    spec.validate()?;
    validate_budget(spec, budget)?;
    let ctx = SolverContext::new(oracle.schema().clone(), seed, budget);
    let solver = solvers::init(spec, &ctx)?;
    execute(solver, oracle, budget, spec.batch_size, seed, cache_enabled)
}

/// Drives an initialized solver for `budget` evaluations.
pub(crate) fn execute(
    mut solver: Box<dyn Solver>,
    oracle: &Oracle,
    budget: usize,
    batch_size: usize,
    seed: u64,
    cache_enabled: bool,
) -> Result<RunArchive, HarnessError> {
    let kind = solver.kind();
    let mut cache = cache_enabled.then(EvalCache::default);
    let mut records: Vec<ArchiveRecord> = Vec::with_capacity(budget);
    for _ in 0..budget / batch_size {
        let mut left = batch_size;
        while left > 0 {
            let n = solver.max_chunk().map_or(left, |c| c.clamp(1, left));
            let batch = solver.propose(n);
            if batch.len() != n {
                return Err(HarnessError::ProposalCount { expected: n, got: batch.len() });
            }
            let start = records.len();
            let seeds: Vec<u64> = (start..start + n).map(|i| render_seed(seed, kind, i)).collect();
            let entries = evaluate_batch(oracle, &batch, &seeds, cache.as_mut())?;
            let evals: Vec<_> = entries.iter().map(|e| e.eval.clone()).collect();
            solver.observe(&evals)?;
            records.extend(entries.into_iter().enumerate().map(|(k, e)| ArchiveRecord {
                iter: start + k,
                solver: kind,
                seed,
                eval: e.eval,
                cached: e.cached,
            }));
            left -= n;
        }
    }
    Ok(RunArchive {
        solver: kind,
        seed,
        schema: oracle.schema().name().to_string(),
        n_bits: oracle.schema().total_bits(),
        records,
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Executes every seed of `config`. With an output directory the manifest is
/// written before any archive, and each archive appears only once complete.
pub fn run(config: &RunConfig) -> Result<Vec<RunArchive>, HarnessError> {
    config.validate()?;
    let (oracle, stats) = config.landscape.resolve()?;
    if let Some(dir) = &config.out {
        write_json(&dir.join(MANIFEST_FILE), &config.manifest(&oracle, &stats))?;
    }
    with_pool(config.parallelism, || {
        config
            .seeds
            .iter()
            .map(|&seed| {
                let archive = run_seed(&oracle, &config.solver, config.budget, seed, config.cache_enabled)?;
                if let Some(dir) = &config.out {
                    write_atomic(&dir.join(RunArchive::file_name(seed)), archive.to_jsonl()?.as_bytes())?;
                }
                Ok(archive)
            })
            .collect()
    })?
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub landscape: Landscape,
    pub solvers: Vec<SolverSpec>,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    pub cache_enabled: bool,
    /// Suite directory; runs go to `<out>/<solver>/`.
    pub out: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(landscape: Landscape, solvers: Vec<SolverSpec>) -> Self {
        Self { landscape, solvers, budget: 1000, seeds: vec![0, 1, 2], parallelism: 0, cache_enabled: true, out: None }
    }

    fn run_config(&self, spec: &SolverSpec) -> RunConfig {
        RunConfig {
            landscape: self.landscape.clone(),
            solver: spec.clone(),
            budget: self.budget,
            seeds: self.seeds.clone(),
            parallelism: 0,
            cache_enabled: self.cache_enabled,
            out: self.out.as_ref().map(|d| d.join(spec.kind.name())),
        }
    }
}

/// A (solver, seed) cell that did not complete.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub solver: SolverKind,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    /// Completed archives ordered by solver position, then seed.
    pub archives: Vec<RunArchive>,
    pub failures: Vec<CellFailure>,
}

/// Runs the solvers x seeds cross product. Failed cells are collected and
/// the rest of the suite continues.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    if config.solvers.is_empty() {
        return Err(HarnessError::EmptySuite);
    }
    if config.seeds.is_empty() {
        return Err(HarnessError::Config("at least one seed is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for spec in &config.solvers {
        if !seen.insert(spec.kind) {
            return Err(HarnessError::Config(format!("solver `{}` listed twice", spec.kind)));
        }
        config.run_config(spec).validate()?;
    }
    let (oracle, stats) = config.landscape.resolve()?;

    if let Some(dir) = &config.out {
        write_json(
            &dir.join(MANIFEST_FILE),
            &SuiteManifest {
                format: ARCHIVE_FORMAT.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                schema: oracle.schema().name().into(),
                profile: oracle.profile().name.clone(),
                solvers: config.solvers.iter().map(|s| s.kind).collect(),
                budget: config.budget,
                seeds: config.seeds.clone(),
            },
        )?;
        for spec in &config.solvers {
            let rc = config.run_config(spec);
            write_json(&rc.out.as_ref().expect("suite has out").join(MANIFEST_FILE), &rc.manifest(&oracle, &stats))?;
        }
    }

    let cells: Vec<(usize, u64)> =
        (0..config.solvers.len()).flat_map(|i| config.seeds.iter().map(move |&s| (i, s))).collect();
    let results: Vec<Result<RunArchive, HarnessError>> = with_pool(config.parallelism, || {
        cells
            .par_iter()
            .map(|&(i, seed)| {
                let spec = &config.solvers[i];
                let archive = run_seed(&oracle, spec, config.budget, seed, config.cache_enabled)?;
                if let Some(dir) = &config.out {
                    let path = dir.join(spec.kind.name()).join(RunArchive::file_name(seed));
                    write_atomic(&path, archive.to_jsonl()?.as_bytes())?;
                }
                Ok(archive)
            })
            .collect()
    })?;

    let mut outcome = SuiteOutcome { archives: Vec::new(), failures: Vec::new() };
    for ((i, seed), r) in cells.into_iter().zip(results) {
        match r {
            Ok(a) => outcome.archives.push(a),
            Err(e) => {
                outcome.failures.push(CellFailure { solver: config.solvers[i].kind, seed, message: e.to_string() })
            }
        }
    }
    if let Some(dir) = &config.out {
        write_failures(dir, &outcome.failures)?;
    }
    Ok(outcome)
}

fn write_failures(dir: &Path, failures: &[CellFailure]) -> Result<(), HarnessError> {
    let path = dir.join(SUITE_ERRORS_FILE);
    if failures.is_empty() {
        if path.exists() {
            std::fs::remove_file(path)?;
        }
        return Ok(());
    }
    let text: String = failures.iter().map(|f| format!("{}\tseed {}\t{}\n", f.solver, f.seed, f.message)).collect();
    write_atomic(&path, text.as_bytes())
}

/// Exhaustive noiseless scan of a small schema: one record per bit string.
pub fn enumerate(landscape: &Landscape, out: Option<&Path>) -> Result<RunArchive, HarnessError> {
    let landscape = Landscape { noiseless: true, ..landscape.clone() };
    let schema = FeatureSchema::resolve(&landscape.schema)?;
    let n = schema.total_bits();
    if n > solvers::MAX_ENUMERATE_BITS {
        return Err(HarnessError::Config(format!(
            "enumeration is limited to {} bits, `{}` has {n}",
            solvers::MAX_ENUMERATE_BITS,
            schema.name()
        )));
    }
    let size = 1usize << n;
    let spec = SolverSpec::new(SolverKind::Enumerate).with_batch(size.min(256), 0);
    let config = RunConfig {
        landscape,
        solver: spec,
        budget: size,
        seeds: vec![0],
        parallelism: 0,
        cache_enabled: true,
        out: out.map(Path::to_path_buf),
    };
    Ok(run(&config)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::BitVector;
    use crate::solvers::testing::planted_oracle;

    fn landscape() -> Landscape {
        Landscape::new("single_page_24", "idp-sim-v1")
    }

    fn default_oracle() -> Oracle {
        landscape().resolve().unwrap().0
    }

    struct Constant(BitVector);

    impl Solver for Constant {
        fn kind(&self) -> SolverKind {
            SolverKind::Random
        }
        fn propose(&mut self, n: usize) -> Vec<BitVector> {
            vec![self.0.clone(); n]
        }
        fn observe(&mut self, _: &[crate::Evaluation]) -> Result<(), SolverError> {
            Ok(())
        }
    }

    #[test]
    fn budget_is_exact_and_contiguous() {
        let o = default_oracle();
        let a = run_seed(&o, &SolverSpec::new(SolverKind::Tpe), 1000, 0, true).unwrap();
        assert_eq!(a.len(), 1000);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.iter == i && r.seed == 0));
    }

    #[test]
    fn repeated_config_costs_one_oracle_call() {
        let o = default_oracle();
        let z = BitVector::from_index(0xABCDE, 24);
        let a = execute(Box::new(Constant(z.clone())), &o, 50, 50, 3, true).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a.records.iter().filter(|r| !r.cached).count(), 1);
        let first = &a.records[0].eval;
        assert!(a.records.iter().all(|r| r.eval == *first));
        assert_eq!(first.render_seed, render_seed(3, SolverKind::Random, 0));
    }

    #[test]
    fn cache_coherence_across_a_run() {
        let o = default_oracle();
        let a = run_seed(&o, &SolverSpec::new(SolverKind::GaExploit), 500, 1, true).unwrap();
        let mut by_bits = std::collections::HashMap::new();
        for r in &a.records {
            let e = by_bits.entry(r.eval.bits.clone()).or_insert_with(|| r.eval.clone());
            assert_eq!(e.r, r.eval.r);
            assert_eq!(e.signature, r.eval.signature);
        }
        assert!(by_bits.len() < a.len());
    }

    #[test]
    fn archives_do_not_depend_on_parallelism() {
        let o = default_oracle();
        let spec = SolverSpec::new(SolverKind::MapElites);
        let go =
            |threads| with_pool(threads, || run_seed(&o, &spec, 300, 4, true).unwrap().to_jsonl().unwrap()).unwrap();
        assert_eq!(go(1), go(6));
    }

    #[test]
    fn running_max_is_monotone() {
        let o = planted_oracle(16);
        let a = run_seed(&o, &SolverSpec::new(SolverKind::Sa), 300, 0, true).unwrap();
        let mut best = f64::NEG_INFINITY;
        for r in &a.records {
            let next = best.max(r.eval.risk);
            assert!(next >= best);
            best = next;
        }
    }

    #[test]
    fn rejects_bad_budgets() {
        let o = default_oracle();
        let spec = SolverSpec::new(SolverKind::GpEi);
        assert!(matches!(run_seed(&o, &spec, 1010, 0, true), Err(HarnessError::Config(_))));
        assert!(matches!(run_seed(&o, &spec, 50, 0, true), Err(HarnessError::Config(_))));
        let e = run_suite(&SuiteConfig::new(landscape(), vec![])).unwrap_err();
        assert!(matches!(e, HarnessError::EmptySuite) && e.is_config());
    }

    #[test]
    fn enumerate_covers_every_bit_string_once() {
        let a = enumerate(&Landscape::new("mini_8", "idp-sim-v1"), None).unwrap();
        assert_eq!(a.len(), 256);
        let distinct: std::collections::HashSet<_> = a.records.iter().map(|r| r.eval.bits.to_index()).collect();
        assert_eq!(distinct.len(), 256);
        assert!(a.records.iter().all(|r| !r.cached));
        assert!(enumerate(&landscape(), None).unwrap_err().is_config());
    }

    #[test]
    fn jsonl_round_trip_and_field_order() {
        let o = default_oracle();
        let a = run_seed(&o, &SolverSpec::new(SolverKind::Random), 100, 2, true).unwrap();
        let text = a.to_jsonl().unwrap();
        let first = text.lines().next().unwrap();
        let keys = [
            "\"iter\"",
            "\"solver\"",
            "\"seed\"",
            "\"bits\"",
            "\"features\"",
            "\"r\"",
            "\"base_risk\"",
            "\"rarity\"",
            "\"risk\"",
            "\"signature\"",
            "\"core_mode\"",
            "\"render_seed\"",
            "\"cached\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| first.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{first}");
        let back = RunArchive::from_jsonl(text.as_bytes(), "single_page_24").unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn manifest_first_and_rerun_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(landscape(), SolverSpec::new(SolverKind::Random));
        cfg.budget = 100;
        cfg.seeds = vec![0, 1];
        cfg.out = Some(dir.path().join("run"));
        run(&cfg).unwrap();
        let read = |name: &str| std::fs::read(dir.path().join("run").join(name)).unwrap();
        let (m, a0) = (read(MANIFEST_FILE), read("seed_0.jsonl"));
        cfg.parallelism = 3;
        run(&cfg).unwrap();
        assert_eq!(read(MANIFEST_FILE), m);
        assert_eq!(read("seed_0.jsonl"), a0);
        let loaded = load_archives(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].schema, "single_page_24");
    }

    #[test]
    fn suite_is_a_cross_product() {
        let mut cfg = SuiteConfig::new(
            landscape(),
            vec![SolverSpec::new(SolverKind::Random), SolverSpec::new(SolverKind::GaExplore)],
        );
        cfg.budget = 100;
        cfg.seeds = vec![0, 1, 2];
        let out = run_suite(&cfg).unwrap();
        assert_eq!(out.archives.len(), 6);
        assert!(out.failures.is_empty());
        let a = &out.archives;
        assert_ne!(a[0].records[0].eval.bits, a[3].records[0].eval.bits);
    }
}
