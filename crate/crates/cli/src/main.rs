//! `riskscout` command-line driver.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, unknown
//! names, unreadable inputs, mixed schemas), 3 for failures during execution.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use riskscout::analytics::{
    self, core_mode_matrix, core_mode_sets, cross_temporal_overlap, exclusivity_table, markdown_report,
    signature_census, summary_table, AnalyticsError, Report,
};
use riskscout::harness::{self, HarnessError, Landscape, RunArchive, RunConfig, SuiteConfig};
use riskscout::predictor::{self, ForestParams, PredictorError, SplitMode, SplitParams};
use riskscout::solvers::{SolverError, SolverKind, SolverSpec};

const THREADS_ENV: &str = "RISKSCOUT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "riskscout", version, about = "Budgeted search for high-risk document configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one solver for one or more seeds.
    Run(RunArgs),
    /// Run a solvers x seeds cross product and summarize it.
    Suite(SuiteArgs),
    /// Set-level analyses over an archive tree.
    Analyze(AnalyzeArgs),
    /// Random-forest risk prediction from an archive tree.
    Predict(PredictArgs),
    /// Exhaustively evaluate a small schema without render noise.
    Enumerate(EnumerateArgs),
    /// Check that a schema, profile and optional archive tree load.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
struct LandscapeArgs {
    /// Built-in schema name or path to a schema file.
    #[arg(long, default_value = "single_page_24")]
    schema: String,
    /// Built-in profile name or path to a profile file.
    #[arg(long, default_value = "idp-sim-v1")]
    profile: String,
    /// Reference statistics file for the rarity score.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Disable render noise.
    #[arg(long)]
    noiseless: bool,
}

impl LandscapeArgs {
    fn landscape(&self) -> Landscape {
        Landscape {
            stats: self.stats.clone(),
            noiseless: self.noiseless,
            ..Landscape::new(&self.schema, &self.profile)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ExecArgs {
    /// Oracle calls per run.
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    /// Proposals per iteration.
    #[arg(long, default_value_t = 50)]
    batch_size: usize,
    /// Uniform warmup draws of the surrogate and learning solvers.
    #[arg(long, default_value_t = 100)]
    n_init: usize,
    /// Worker threads; 0 uses the global pool.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Evaluate repeated configurations again instead of reusing them.
    #[arg(long)]
    no_cache: bool,
    /// Solver parameter override, `key=value` (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    #[arg(long)]
    solver: String,
    #[command(flatten)]
    exec: ExecArgs,
    /// Master seeds, comma separated.
    #[arg(long = "seed", alias = "seeds", value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    /// `all` or a comma separated list of solver names.
    #[arg(long, default_value = "all")]
    solvers: String,
    /// In a suite, `--param solver.key=value` targets one solver and
    /// `--param key=value` every solver that has `key`.
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum AnalysisKind {
    Summary,
    Exclusivity,
    Overlap,
    Modes,
    Signatures,
    All,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Analyses to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    kind: Vec<AnalysisKind>,
    /// Archive tree written by `run` or `suite`.
    #[arg(long)]
    archives: PathBuf,
    #[arg(long, default_value = "analysis")]
    out: PathBuf,
    /// Budget grid spacing of the exclusivity and overlap curves.
    #[arg(long, default_value_t = 50)]
    step: usize,
    /// Solver frozen at each snapshot in the overlap analysis.
    #[arg(long)]
    fix: Option<String>,
    /// Solver whose discoveries grow in the overlap analysis.
    #[arg(long)]
    against: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "100,500,1000")]
    snapshots: Vec<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    archives: PathBuf,
    #[arg(long, default_value = "prediction")]
    out: PathBuf,
    /// Seed whose archives form the data set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split modes: full, portfolio_random, portfolio_early, per_method (every
    /// solver) or per_method:<solver>.
    #[arg(long, value_delimiter = ',', default_value = "full,portfolio_random,portfolio_early,per_method")]
    modes: Vec<String>,
    #[arg(long, default_value_t = 700)]
    train_size: usize,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Seed of the portfolio subsampling.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// Candidate features per split; defaults to the square root of the bit count.
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    forest_seed: u64,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long, default_value = "mini_8")]
    schema: String,
    #[arg(long, default_value = "idp-sim-v1")]
    profile: String,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    /// Also load every archive under this directory.
    #[arg(long)]
    archives: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn config(msg: impl Display) -> Self {
        Self::Config(anyhow!("{msg}"))
    }

    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Self::Config(e.into())
        } else {
            Self::Runtime(e.into())
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Io(_) | AnalyticsError::Csv(_) => Self::Runtime(e.into()),
            _ => Self::Config(e.into()),
        }
    }
}

impl From<PredictorError> for Failure {
    fn from(e: PredictorError) -> Self {
        match e {
            PredictorError::ZeroVariance => Self::Runtime(e.into()),
            _ => Self::Config(e.into()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::UnknownKind(_) | SolverError::BadParam(_) => Self::Config(e.into()),
            _ => Self::Runtime(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn parse_param(raw: &str) -> Result<(&str, f64), Failure> {
    let (k, v) = raw.split_once('=').ok_or_else(|| Failure::config(format!("`{raw}` is not KEY=VALUE")))?;
    let v: f64 = v.trim().parse().map_err(|_| Failure::config(format!("`{v}` is not a number")))?;
    Ok((k.trim(), v))
}

fn solver_spec(kind: SolverKind, exec: &ExecArgs) -> SolverSpec {
    SolverSpec::new(kind).with_batch(exec.batch_size, if kind.uses_warmup() { exec.n_init } else { 0 })
}

fn parse_solvers(list: &str) -> Result<Vec<SolverKind>, Failure> {
    if list.trim() == "all" {
        return Ok(SolverKind::ALL.to_vec());
    }
    list.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.parse::<SolverKind>().map_err(Failure::from)).collect()
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let kind: SolverKind = a.solver.parse()?;
    let mut spec = solver_spec(kind, &a.exec);
    for raw in &a.exec.params {
        let (k, v) = parse_param(raw)?;
        spec = spec.with_param(k, v)?;
    }
    let config = RunConfig {
        landscape: a.landscape.landscape(),
        solver: spec,
        budget: a.exec.budget,
        seeds: a.seeds,
        parallelism: a.exec.parallelism,
        cache_enabled: !a.exec.no_cache,
        out: Some(a.out.clone()),
    };
    for archive in harness::run(&config)? {
        let best = archive.evaluations().map(|e| e.risk).fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{} seed {}: {} records, max risk {best:.4} -> {}",
            archive.solver,
            archive.seed,
            archive.len(),
            a.out.join(RunArchive::file_name(archive.seed)).display()
        );
    }
    Ok(())
}

fn suite_specs(a: &SuiteArgs) -> Result<Vec<SolverSpec>, Failure> {
    let mut specs: Vec<SolverSpec> = parse_solvers(&a.solvers)?.into_iter().map(|k| solver_spec(k, &a.exec)).collect();
    for raw in &a.exec.params {
        let (key, v) = parse_param(raw)?;
        match key.split_once('.') {
            Some((solver, k)) => {
                let kind: SolverKind = solver.parse()?;
                let spec = specs
                    .iter_mut()
                    .find(|s| s.kind == kind)
                    .ok_or_else(|| Failure::config(format!("`{solver}` is not part of the suite")))?;
                *spec = spec.clone().with_param(k, v)?;
            }
            None => {
                let mut hit = false;
                for spec in specs.iter_mut().filter(|s| s.params.contains_key(key)) {
                    *spec = spec.clone().with_param(key, v)?;
                    hit = true;
                }
                if !hit {
                    return Err(Failure::config(format!("no solver in the suite has parameter `{key}`")));
                }
            }
        }
    }
    Ok(specs)
}

fn cmd_suite(a: SuiteArgs) -> CmdResult {
    let config = SuiteConfig {
        budget: a.exec.budget,
        seeds: a.seeds.clone(),
        parallelism: a.exec.parallelism,
        cache_enabled: !a.exec.no_cache,
        out: Some(a.out.clone()),
        ..SuiteConfig::new(a.landscape.landscape(), suite_specs(&a)?)
    };
    let outcome = harness::run_suite(&config)?;
    if !outcome.archives.is_empty() {
        let (oracle, _) = config.landscape.resolve()?;
        let rows = summary_table(&outcome.archives, oracle.schema())?;
        analytics::write_summary_csv(&a.out.join("summary.csv"), &rows)?;
        print!("{}", markdown_report(&Report { summary: Some(rows), ..Default::default() }));
    }
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("{} seed {}: {}", f.solver, f.seed, f.message);
    }
    Err(Failure::Runtime(anyhow!(
        "{} of {} runs failed, see {}",
        outcome.failures.len(),
        outcome.failures.len() + outcome.archives.len(),
        a.out.join(harness::SUITE_ERRORS_FILE).display()
    )))
}

fn archives_of(archives: &[RunArchive], kind: SolverKind) -> Vec<&RunArchive> {
    archives.iter().filter(|a| a.solver == kind).collect()
}

fn cmd_analyze(a: AnalyzeArgs) -> CmdResult {
    if a.step == 0 {
        return Err(Failure::config("--step must be positive"));
    }
    let set = harness::load_archive_set(&a.archives)?;
    let kinds: BTreeSet<AnalysisKind> = if a.kind.contains(&AnalysisKind::All) {
        let mut all = BTreeSet::from([
            AnalysisKind::Summary,
            AnalysisKind::Exclusivity,
            AnalysisKind::Modes,
            AnalysisKind::Signatures,
        ]);
        if a.fix.is_some() || a.against.is_some() {
            all.insert(AnalysisKind::Overlap);
        }
        all
    } else {
        a.kind.iter().copied().collect()
    };
    let mut report = Report::default();
    let mut written = Vec::new();
    for kind in kinds {
        match kind {
            AnalysisKind::Summary => {
                let rows = summary_table(&set.archives, &set.schema)?;
                written.push(out_file(&a.out, "summary.csv", |p| analytics::write_summary_csv(p, &rows))?);
                report.summary = Some(rows);
            }
            AnalysisKind::Exclusivity => {
                let curves = exclusivity_table(&set.archives, a.step)?;
                written.push(out_file(&a.out, "exclusivity.csv", |p| analytics::write_exclusivity_csv(p, &curves))?);
                report.exclusivity = Some(curves);
            }
            AnalysisKind::Overlap => {
                let (Some(fix), Some(against)) = (&a.fix, &a.against) else {
                    return Err(Failure::config("--kind overlap needs --fix and --against"));
                };
                let (fix, against): (SolverKind, SolverKind) = (fix.parse()?, against.parse()?);
                let mut rows = Vec::new();
                for x in archives_of(&set.archives, fix) {
                    let Some(y) = archives_of(&set.archives, against).into_iter().find(|y| y.seed == x.seed) else {
                        continue;
                    };
                    for r in cross_temporal_overlap(x, y, &a.snapshots, a.step)? {
                        rows.push((fix, against, x.seed, r));
                    }
                }
                if rows.is_empty() {
                    return Err(Failure::config(format!("no seed has archives for both `{fix}` and `{against}`")));
                }
                written.push(out_file(&a.out, "overlap.csv", |p| analytics::write_overlap_csv(p, &rows))?);
                report.overlap = Some(rows);
            }
            AnalysisKind::Modes => {
                let named: Vec<_> =
                    core_mode_sets(&set.archives).into_iter().map(|(k, s)| (k.label().to_string(), s)).collect();
                let m = core_mode_matrix(&named)?;
                written.push(out_file(&a.out, "modes.csv", |p| analytics::write_modes_csv(p, &m))?);
                report.modes = Some(m);
            }
            AnalysisKind::Signatures => {
                let c = signature_census(&set.archives, &set.components);
                written.push(out_file(&a.out, "signatures.csv", |p| analytics::write_signature_csv(p, &c))?);
                report.signatures = Some(c);
            }
            AnalysisKind::All => unreachable!("expanded above"),
        }
    }
    let md = a.out.join("report.md");
    harness::write_atomic(&md, markdown_report(&report).as_bytes())?;
    written.push(md);
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn out_file(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&Path) -> Result<(), AnalyticsError>,
) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    write(&path)?;
    Ok(path)
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let set = harness::load_archive_set(&a.archives)?;
    let archives: Vec<RunArchive> = set.archives.into_iter().filter(|x| x.seed == a.seed).collect();
    if archives.is_empty() {
        return Err(Failure::config(format!("no archives with seed {}", a.seed)));
    }
    let mut modes = Vec::new();
    for m in &a.modes {
        if m.trim() == "per_method" {
            modes.extend(archives.iter().map(|x| SplitMode::PerMethod(x.solver)));
        } else {
            modes.push(m.parse::<SplitMode>()?);
        }
    }
    let split = SplitParams {
        train_fraction: a.train_fraction,
        train_size: a.train_size,
        seed: a.split_seed,
        ..SplitParams::default()
    };
    let forest = ForestParams {
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_leaf: a.min_leaf,
        features_per_split: a.features_per_split,
        bootstrap: !a.no_bootstrap,
        seed: a.forest_seed,
    };
    forest.validate()?;
    let rows = predictor::prediction_report(&archives, &modes, &split, &forest)?;
    let path = a.out.join("prediction_report.csv");
    predictor::write_prediction_csv(&path, &rows)?;
    println!("| Category | Method | R2 | MAE | RMSE | Holdout |");
    println!("|---|---|---|---|---|---|");
    for r in &rows {
        println!(
            "| {} | {} | {:.3} | {:.3} | {:.3} | {} |",
            r.category, r.mode, r.metrics.r2, r.metrics.mae, r.metrics.rmse, r.holdout_size
        );
    }
    println!("{}", path.display());
    Ok(())
}

fn cmd_enumerate(a: EnumerateArgs) -> CmdResult {
    let landscape = Landscape { stats: a.stats, ..Landscape::new(&a.schema, &a.profile) };
    let archive = harness::enumerate(&landscape, a.out.as_deref())?;
    let best = archive
        .evaluations()
        .fold(None, |best: Option<&riskscout::Evaluation>, e| match best {
            Some(b) if b.risk >= e.risk => Some(b),
            _ => Some(e),
        })
        .ok_or_else(|| Failure::Runtime(anyhow!("empty enumeration")))?;
    println!("configurations: {}", archive.len());
    println!("global max risk: {}", best.risk);
    println!("bits: {}", best.bits);
    for (name, v) in &best.features.0 {
        println!("  {name} = {v}");
    }
    if let Some(dir) = &a.out {
        println!("{}", dir.join(RunArchive::file_name(0)).display());
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let (oracle, _) = a.landscape.landscape().resolve()?;
    let s = oracle.schema();
    let size = s.space_size();
    println!(
        "schema {}: {} features, {} bits, {} distinct configurations",
        s.name(),
        s.features().len(),
        s.total_bits(),
        size.semantic
    );
    println!("profile {}: components {}", oracle.profile().name, oracle.component_names().join(", "));
    if let Some(dir) = &a.archives {
        let set = harness::load_archive_set(dir)?;
        if set.schema.name() != s.name() {
            return Err(Failure::config(format!("archives use schema `{}`, not `{}`", set.schema.name(), s.name())));
        }
        let records: usize = set.archives.iter().map(RunArchive::len).sum();
        println!("archives: {} runs, {records} records", set.archives.len());
    }
    Ok(())
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| Failure::config(format!("{THREADS_ENV}=`{raw}` is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(anyhow!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Validate(a) => cmd_validate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
