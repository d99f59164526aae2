//! Core risk modes: failure signatures flattened together with the density,
//! noise and layout regimes that produced them.
//!
//! The canonical label is the sorted list of `KEY:VALUE` predicates joined by
//! `" | "`, e.g. `DENSITY:HIGH | FAILURE:TABLE_TRUNCATED | LAYOUT:HARD_SPLIT | NOISE:HIGH`.
//! The noise predicate is optional so that listings without it still parse.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::latents::Latents;
use super::{FailureSignature, OracleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DensityRegime {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseRegime {
    No,
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayoutSplit {
    NoSplit,
    SoftSplit,
    HardSplit,
}

impl DensityRegime {
    /// Tri-partition of the density latent at 1/3 and 2/3.
    pub fn from_density(d: f64) -> Self {
        if d < 1.0 / 3.0 {
            Self::Low
        } else if d < 2.0 / 3.0 {
            Self::Medium
        } else {
            Self::High
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Low => "LOW",
            Self::Medium => "MEDIUM",
            Self::High => "HIGH",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "LOW" => Self::Low,
            "MEDIUM" => Self::Medium,
            "HIGH" => Self::High,
            _ => return None,
        })
    }
}

impl NoiseRegime {
    pub fn from_level(level: u32) -> Self {
        match level {
            0 => Self::No,
            1 => Self::Low,
            2 => Self::Mid,
            _ => Self::High,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::No => "NO",
            Self::Low => "LOW",
            Self::Mid => "MID",
            Self::High => "HIGH",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "NO" => Self::No,
            "LOW" => Self::Low,
            "MID" => Self::Mid,
            "HIGH" => Self::High,
            _ => return None,
        })
    }
}

impl LayoutSplit {
    pub fn from_index(v: u32) -> Self {
        match v {
            0 => Self::NoSplit,
            1 => Self::SoftSplit,
            _ => Self::HardSplit,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::NoSplit => "NO_SPLIT",
            Self::SoftSplit => "SOFT_SPLIT",
            Self::HardSplit => "HARD_SPLIT",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "NO_SPLIT" => Self::NoSplit,
            "SOFT_SPLIT" => Self::SoftSplit,
            "HARD_SPLIT" => Self::HardSplit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoreRiskMode {
    pub density: DensityRegime,
    pub failures: BTreeSet<String>,
    pub layout: LayoutSplit,
    pub noise: Option<NoiseRegime>,
}

impl CoreRiskMode {
    /// Canonical form. Modes are canonical by construction, so this is the
    /// identity on every value the type can hold.
    pub fn flatten(&self) -> CoreRiskMode {
        self.clone()
    }

    pub fn label(&self) -> String {
        let mut preds = vec![format!("DENSITY:{}", self.density.label())];
        preds.extend(self.failures.iter().map(|f| format!("FAILURE:{f}")));
        preds.push(format!("LAYOUT:{}", self.layout.label()));
        if let Some(n) = self.noise {
            preds.push(format!("NOISE:{}", n.label()));
        }
        preds.sort();
        preds.join(" | ")
    }
}

/// Flattens a configuration and its signature into a core mode.
///
/// Schemas without `NOISE_LEVEL` / `LAYOUT_SPLIT` map to `NO` / `NO_SPLIT`.
pub fn core_risk_mode(latents: &Latents, signature: &FailureSignature, component_names: &[String]) -> CoreRiskMode {
    CoreRiskMode {
        density: DensityRegime::from_density(latents.d),
        failures: signature.iter().zip(component_names).filter(|(on, _)| *on).map(|(_, n)| n.clone()).collect(),
        layout: LayoutSplit::from_index(latents.layout_split.unwrap_or(0)),
        noise: Some(NoiseRegime::from_level(latents.noise_level.unwrap_or(0))),
    }
}

impl fmt::Display for CoreRiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for CoreRiskMode {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OracleError::BadModeLabel(s.to_string());
        let mut density = None;
        let mut layout = None;
        let mut noise = None;
        let mut failures = BTreeSet::new();
        for pred in s.split('|').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pred.split_once(':').ok_or_else(bad)?;
            match key.trim() {
                "DENSITY" => density = Some(DensityRegime::parse(value.trim()).ok_or_else(bad)?),
                "LAYOUT" => layout = Some(LayoutSplit::parse(value.trim()).ok_or_else(bad)?),
                "NOISE" => noise = Some(NoiseRegime::parse(value.trim()).ok_or_else(bad)?),
                "FAILURE" => {
                    failures.insert(value.trim().to_string());
                }
                _ => return Err(bad()),
            }
        }
        Ok(Self { density: density.ok_or_else(bad)?, failures, layout: layout.ok_or_else(bad)?, noise })
    }
}

impl Serialize for CoreRiskMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for CoreRiskMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSchema;

    fn names() -> Vec<String> {
        ["OCR_DEGRADED", "LAYOUT_FRAGMENTED", "KV_MISSED", "TABLE_TRUNCATED", "SUMMARY_MISSING", "TEXT_GARBLED"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn zero_mode() {
        let s = FeatureSchema::builtin("single_page_24").unwrap();
        let l = Latents::from_indices(&s, vec![0; s.features().len()]);
        let sig = FailureSignature(vec![false; 6]);
        let m = core_risk_mode(&l, &sig, &names());
        assert_eq!(m.label(), "DENSITY:LOW | LAYOUT:NO_SPLIT | NOISE:NO");
        assert!(m.failures.is_empty());
    }

    #[test]
    fn paper_style_label() {
        let s = FeatureSchema::builtin("single_page_24").unwrap();
        // all counts max except text -> d = (1 + 0 + 1 + 1)/4 = 0.75
        let mut idx = vec![0u32; s.features().len()];
        for (name, v) in [
            ("MAX_KV", 3),
            ("MAX_TBL_ROWS", 7),
            ("MAX_TBL_COLS", 7),
            ("MAX_SUMMARY_ROWS", 7),
            ("MAX_SUMMARY_COLS", 7),
            ("LAYOUT_SPLIT", 2),
        ] {
            idx[s.index_of(name).unwrap()] = v;
        }
        let l = Latents::from_indices(&s, idx);
        let sig = FailureSignature(vec![false, false, false, true, true, false]);
        let mut m = core_risk_mode(&l, &sig, &names());
        m.noise = None;
        assert_eq!(m.label(), "DENSITY:HIGH | FAILURE:SUMMARY_MISSING | FAILURE:TABLE_TRUNCATED | LAYOUT:HARD_SPLIT");
    }

    #[test]
    fn flatten_idempotent_and_parse_round_trip() {
        let m: CoreRiskMode =
            "DENSITY:MEDIUM | FAILURE:TABLE_TRUNCATED | LAYOUT:SOFT_SPLIT | NOISE:MID".parse().unwrap();
        assert_eq!(m.flatten(), m);
        assert_eq!(m.flatten().flatten(), m.flatten());
        assert_eq!(m.label().parse::<CoreRiskMode>().unwrap(), m);
        // predicate order in the input does not matter
        let n: CoreRiskMode =
            "NOISE:MID | LAYOUT:SOFT_SPLIT | FAILURE:TABLE_TRUNCATED | DENSITY:MEDIUM".parse().unwrap();
        assert_eq!(m, n);
        assert!("DENSITY:ULTRA | LAYOUT:NO_SPLIT".parse::<CoreRiskMode>().is_err());
        assert!("LAYOUT:NO_SPLIT".parse::<CoreRiskMode>().is_err());
    }

    #[test]
    fn density_cutpoints() {
        assert_eq!(DensityRegime::from_density(0.0), DensityRegime::Low);
        assert_eq!(DensityRegime::from_density(1.0 / 3.0), DensityRegime::Medium);
        assert_eq!(DensityRegime::from_density(2.0 / 3.0), DensityRegime::High);
        assert_eq!(DensityRegime::from_density(0.9), DensityRegime::High);
    }
}
