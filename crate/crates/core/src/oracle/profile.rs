//! Landscape profiles: error components, weights, thresholds and term tables.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::latents::{LatentRef, Latents};
use super::OracleError;
use crate::schema::FeatureSchema;

pub const BUILTIN_PROFILES: [&str; 1] = ["idp-sim-v1"];

/// One `coef * product-of-latents` term. An empty product is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub coef: f64,
    #[serde(default)]
    pub product: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub weight: f64,
    pub threshold: f64,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeProfile {
    pub name: String,
    pub lambda: f64,
    pub noise_sigma: f64,
    #[serde(rename = "component")]
    pub components: Vec<ComponentSpec>,
}

impl LandscapeProfile {
    pub fn builtin(name: &str) -> Result<Self, OracleError> {
        match name {
            "idp-sim-v1" => Self::from_toml_str(include_str!("../../data/profiles/idp-sim-v1.toml")),
            _ => Err(OracleError::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, OracleError> {
        let p: Self = toml::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_str(text: &str) -> Result<Self, OracleError> {
        let p: Self = serde_json::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn resolve(name_or_path: &str) -> Result<Self, OracleError> {
        if BUILTIN_PROFILES.contains(&name_or_path) {
            Self::builtin(name_or_path)
        } else {
            Self::from_file(Path::new(name_or_path))
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |reason: String| Err(OracleError::InvalidProfile(reason));
        if self.components.is_empty() {
            return bad("at least one component is required".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        let mut names = HashSet::new();
        for c in &self.components {
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate component `{}`", c.name));
            }
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return bad(format!("component `{}`: weight must be finite and >= 0", c.name));
            }
            if !(c.threshold > 0.0 && c.threshold < 1.0) {
                return bad(format!("component `{}`: threshold must lie in (0, 1)", c.name));
            }
            if c.terms.iter().any(|t| !t.coef.is_finite()) {
                return bad(format!("component `{}`: non-finite coefficient", c.name));
            }
        }
        Ok(())
    }

    pub fn component_names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.threshold).collect()
    }

    /// Upper bound on risk: `(sum of weights) * (1 + lambda)`.
    pub fn max_risk(&self) -> f64 {
        self.weights().iter().sum::<f64>() * (1.0 + self.lambda)
    }

    /// Resolves every latent name against `schema`.
    pub fn compile(&self, schema: &FeatureSchema) -> Result<TermTable, OracleError> {
        let components = self
            .components
            .iter()
            .map(|c| {
                c.terms
                    .iter()
                    .map(|t| {
                        let factors = t
                            .product
                            .split('*')
                            .map(str::trim)
                            .filter(|s| !s.is_empty() && *s != "1")
                            .map(|name| {
                                LatentRef::resolve(name, schema).ok_or_else(|| OracleError::UnknownLatent {
                                    component: c.name.clone(),
                                    latent: name.to_string(),
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(CompiledTerm { coef: t.coef, factors })
                    })
                    .collect::<Result<Vec<_>, OracleError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TermTable { components })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledTerm {
    pub coef: f64,
    pub factors: Vec<LatentRef>,
}

/// Term table with latent names resolved for one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TermTable {
    pub components: Vec<Vec<CompiledTerm>>,
}

impl TermTable {
    /// Noise-free, unclamped sum of terms for component `k`.
    pub fn raw(&self, k: usize, latents: &Latents) -> f64 {
        self.components[k].iter().map(|t| t.coef * t.factors.iter().map(|&f| latents.get(f)).product::<f64>()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_shape() {
        let p = LandscapeProfile::builtin("idp-sim-v1").unwrap();
        assert_eq!(p.components.len(), 6);
        assert_eq!(p.weights(), vec![1.0, 0.8, 0.8, 1.2, 0.6, 0.6]);
        assert!(p.thresholds().iter().all(|&t| t == 0.5));
        assert_eq!(p.lambda, 0.2);
        assert_eq!(p.noise_sigma, 0.03);
        for s in ["single_page_24", "multi_page_27", "mini_8"] {
            p.compile(&FeatureSchema::builtin(s).unwrap()).unwrap();
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut p = LandscapeProfile::builtin("idp-sim-v1").unwrap();
        p.components[0].threshold = 0.0;
        assert!(p.validate().is_err());
        let mut p = LandscapeProfile::builtin("idp-sim-v1").unwrap();
        p.components[0].weight = f64::NAN;
        assert!(p.validate().is_err());
        let mut p = LandscapeProfile::builtin("idp-sim-v1").unwrap();
        p.components.clear();
        assert!(p.validate().is_err());
    }

    #[test]
    fn unknown_latent() {
        let mut p = LandscapeProfile::builtin("idp-sim-v1").unwrap();
        p.components[0].terms.push(TermSpec { coef: 1.0, product: "eta*nope".into() });
        let s = FeatureSchema::builtin("single_page_24").unwrap();
        assert!(matches!(p.compile(&s), Err(OracleError::UnknownLatent { .. })));
    }
}
