//! Archive records, manifests and their on-disk form.
//!
//! A run directory holds `manifest.json` plus one `seed_<s>.jsonl` per seed,
//! one record per line. Suites nest run directories under a suite manifest.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::oracle::{Evaluation, LandscapeProfile, ReferenceStats};
use crate::schema::{FeatureSchema, SchemaDocument};
use crate::solvers::{SolverKind, SolverSpec};

pub const ARCHIVE_FORMAT: &str = "riskscout-archive/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One archive line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRecord {
    pub iter: usize,
    pub solver: SolverKind,
    pub seed: u64,
    #[serde(flatten)]
    pub eval: Evaluation,
    pub cached: bool,
}

/// Fully resolved configuration of one run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub schema: SchemaDocument,
    pub profile: LandscapeProfile,
    pub stats: ReferenceStats,
    pub solver: SolverSpec,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub cache_enabled: bool,
    pub noiseless: bool,
    /// How repeated configurations are rendered.
    pub render_policy: String,
}

impl Manifest {
    pub fn schema_name(&self) -> &str {
        &self.schema.name
    }
}

/// Top-level record of a suite directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub format: String,
    pub version: String,
    pub schema: String,
    pub profile: String,
    pub solvers: Vec<SolverKind>,
    pub budget: usize,
    pub seeds: Vec<u64>,
}

/// The ordered evaluations of one (solver, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub solver: SolverKind,
    pub seed: u64,
    pub schema: String,
    pub n_bits: usize,
    pub records: Vec<ArchiveRecord>,
}

impl RunArchive {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn evaluations(&self) -> impl Iterator<Item = &Evaluation> + '_ {
        self.records.iter().map(|r| &r.eval)
    }

    /// Archive text, one JSON object per line.
    pub fn to_jsonl(&self) -> Result<String, HarnessError> {
        let mut out = Vec::with_capacity(self.records.len() * 512);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
    }

    /// Parses archive lines. `schema` is taken from the caller (usually the
    /// sibling manifest).
    pub fn from_jsonl<R: BufRead>(reader: R, schema: &str) -> Result<Self, HarnessError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ArchiveRecord =
                serde_json::from_str(&line).map_err(|e| HarnessError::Archive(format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        let first = records.first().ok_or_else(|| HarnessError::Archive("archive is empty".into()))?;
        let (solver, seed, n_bits) = (first.solver, first.seed, first.eval.bits.len());
        if records.iter().any(|r| r.solver != solver || r.seed != seed || r.eval.bits.len() != n_bits) {
            return Err(HarnessError::Archive("records mix solvers, seeds or widths".into()));
        }
        Ok(Self { solver, seed, schema: schema.to_string(), n_bits, records })
    }

    pub fn file_name(seed: u64) -> String {
        format!("seed_{seed}.jsonl")
    }
}

/// Writes `contents` next to `path` and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(contents)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Archive(format!("{}: {e}", path.display())))
}

/// Loads every run archive below `root`, ordered by solver then seed.
///
/// A directory counts as a run directory when it holds a run manifest;
/// suite manifests are skipped.
pub fn load_archives(root: &Path) -> Result<Vec<RunArchive>, HarnessError> {
    Ok(scan(root)?.into_iter().map(|(_, a)| a).collect())
}

/// Archives below a directory together with the schema and error components
/// they share.
#[derive(Debug, Clone)]
pub struct ArchiveSet {
    pub archives: Vec<RunArchive>,
    pub schema: FeatureSchema,
    pub components: Vec<String>,
}

/// Like [`load_archives`], but fails with a configuration error when the
/// archives disagree on schema or error components.
pub fn load_archive_set(root: &Path) -> Result<ArchiveSet, HarnessError> {
    let found = scan(root)?;
    let (first, _) =
        found.first().ok_or_else(|| HarnessError::Config(format!("no archives under {}", root.display())))?;
    let schema = FeatureSchema::build(first.schema.clone())?;
    let components = first.profile.component_names();
    for (m, a) in &found {
        let other = FeatureSchema::build(m.schema.clone())?;
        if other != schema {
            return Err(HarnessError::Config(format!(
                "archives mix schemas `{}` and `{}`",
                schema.name(),
                other.name()
            )));
        }
        if m.profile.component_names() != components || a.n_bits != schema.total_bits() {
            return Err(HarnessError::Config(format!("archive {} {} disagrees with the set", a.solver, a.seed)));
        }
    }
    Ok(ArchiveSet { archives: found.into_iter().map(|(_, a)| a).collect(), schema, components })
}

fn scan(root: &Path) -> Result<Vec<(Manifest, RunArchive)>, HarnessError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        let manifest = match read_manifest(&dir) {
            Ok(m) => Some(m),
            Err(HarnessError::Io(_)) | Err(HarnessError::Archive(_)) => None,
            Err(e) => return Err(e),
        };
        for path in entries {
            if path.is_dir() {
                stack.push(path);
            } else if let Some(m) = &manifest {
                let is_archive = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed_") && n.ends_with(".jsonl"));
                if is_archive {
                    let reader = BufReader::new(File::open(&path)?);
                    out.push((m.clone(), RunArchive::from_jsonl(reader, m.schema_name())?));
                }
            }
        }
    }
    out.sort_by_key(|(_, a)| (a.solver, a.seed));
    Ok(out)
}
