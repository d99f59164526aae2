//! Rarity reweighting from reference value frequencies.
//!
//! Statistics are organized in groups. A group lists one or more features and
//! the frequency of each joint value; rarity is the mean over groups of
//! `1 - freq(joint value)`. A group without an explicit table is uniform over
//! the joint values the schema can reach.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::schema::{FeatureAssignment, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsGroup {
    pub name: String,
    pub features: Vec<String>,
    /// Joint value (comma-separated indices, feature order) to frequency.
    /// Joint values missing from an explicit table have frequency 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    #[serde(rename = "group")]
    pub groups: Vec<StatsGroup>,
}

const DEFAULT_GROUPS: [(&str, &[&str]); 3] = [
    ("density", &["MAX_KV", "MAX_TEXT", "MAX_TBL_ROWS", "MAX_TBL_COLS", "MAX_SUMMARY_ROWS", "MAX_SUMMARY_COLS"]),
    ("noise", &["NOISE_LEVEL", "MAX_TBL_ROWS", "MAX_TBL_COLS"]),
    ("pagination", &["NUM_PAGES", "TABLE_CONTINUE_PAGE", "SUMMARY_LAST_PAGE", "LAYOUT_SPLIT"]),
];

impl ReferenceStats {
    /// Uniform density / noise / pagination interaction groups, restricted to
    /// the features the schema declares. Empty groups are dropped.
    pub fn default_for(schema: &FeatureSchema) -> Self {
        let groups = DEFAULT_GROUPS
            .iter()
            .filter_map(|(name, feats)| {
                let present: Vec<String> =
                    feats.iter().filter(|f| schema.index_of(f).is_some()).map(|f| f.to_string()).collect();
                (!present.is_empty()).then(|| StatsGroup {
                    name: name.to_string(),
                    features: present,
                    frequencies: None,
                })
            })
            .collect();
        Self { groups }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, OracleError> {
        toml::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| OracleError::Parse(e.to_string())),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn compile(&self, schema: &FeatureSchema) -> Result<CompiledStats, OracleError> {
        let groups = self
            .groups
            .iter()
            .map(|g| {
                if g.features.is_empty() {
                    return Err(OracleError::MissingStats(format!("group `{}` is empty", g.name)));
                }
                let idx = g
                    .features
                    .iter()
                    .map(|f| {
                        schema.index_of(f).ok_or_else(|| {
                            OracleError::MissingStats(format!("group `{}`: feature `{f}` not in schema", g.name))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let table = match &g.frequencies {
                    None => {
                        let joint: f64 = idx.iter().map(|&i| schema.features()[i].reachable_values() as f64).product();
                        FrequencyTable::Uniform(1.0 / joint)
                    }
                    Some(map) => {
                        let mut t = HashMap::with_capacity(map.len());
                        for (key, &freq) in map {
                            let values = key
                                .split(',')
                                .map(|v| v.trim().parse::<u32>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|_| OracleError::Parse(format!("group `{}`: bad key `{key}`", g.name)))?;
                            if values.len() != idx.len() || !(0.0..=1.0).contains(&freq) {
                                return Err(OracleError::Parse(format!("group `{}`: bad entry `{key}`", g.name)));
                            }
                            t.insert(values, freq);
                        }
                        FrequencyTable::Explicit(t)
                    }
                };
                Ok(CompiledGroup { features: idx, table })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledStats { groups })
    }

    /// Rarity of an assignment (see module docs).
    pub fn rarity(&self, schema: &FeatureSchema, features: &FeatureAssignment) -> Result<f64, OracleError> {
        let compiled = self.compile(schema)?;
        let idx = schema.indices_of(features)?;
        Ok(compiled.rarity(&idx))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FrequencyTable {
    Uniform(f64),
    Explicit(HashMap<Vec<u32>, f64>),
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledGroup {
    features: Vec<usize>,
    table: FrequencyTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledStats {
    groups: Vec<CompiledGroup>,
}

impl CompiledStats {
    /// Mean over groups of `1 - freq`; 0 when there are no groups.
    pub fn rarity(&self, indices: &[u32]) -> f64 {
        if self.groups.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .groups
            .iter()
            .map(|g| {
                let freq = match &g.table {
                    FrequencyTable::Uniform(f) => *f,
                    FrequencyTable::Explicit(t) => {
                        let key: Vec<u32> = g.features.iter().map(|&i| indices[i]).collect();
                        t.get(&key).copied().unwrap_or(0.0)
                    }
                };
                1.0 - freq
            })
            .sum();
        total / self.groups.len() as f64
    }
}
