//! Surrogate document-processing oracle.
//!
//! A configuration is decoded, turned into normalized latents, and pushed
//! through the profile's term table to produce `K` error components in
//! `[0, 1]`. Render noise is a bounded uniform perturbation seeded only by
//! `(bits, render_seed, k)`, so an evaluation is a pure function of its inputs.

mod latents;
mod modes;
mod profile;
mod rarity;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::schema::{BitVector, FeatureAssignment, FeatureSchema, SchemaError};
use crate::seeding::{self, purpose};

pub use latents::{derive_latents, LatentRef, Latents, NamedLatent};
pub use modes::{core_risk_mode, CoreRiskMode, DensityRegime, LayoutSplit, NoiseRegime};
pub use profile::{CompiledTerm, ComponentSpec, LandscapeProfile, TermSpec, TermTable, BUILTIN_PROFILES};
pub use rarity::{CompiledStats, ReferenceStats, StatsGroup};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("component `{component}` references unknown latent `{latent}`")]
    UnknownLatent { component: String, latent: String },
    #[error("missing reference statistics: {0}")]
    MissingStats(String),
    #[error("unknown built-in profile `{0}`")]
    UnknownBuiltin(String),
    #[error("bad core-mode label `{0}`")]
    BadModeLabel(String),
    #[error("cannot read file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse file: {0}")]
    Parse(String),
}

/// Normalized error components, each clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorVector(pub Vec<f64>);

impl ErrorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-component failure indicators, serialized as a `0`/`1` string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FailureSignature(pub Vec<bool>);

impl FailureSignature {
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }
}

impl fmt::Display for FailureSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FailureSignature {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(OracleError::Parse(format!("bad signature `{s}`"))),
            })
            .collect::<Result<_, _>>()
            .map(FailureSignature)
    }
}

impl Serialize for FailureSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FailureSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub bits: BitVector,
    pub features: FeatureAssignment,
    pub r: ErrorVector,
    pub base_risk: f64,
    pub rarity: f64,
    pub risk: f64,
    pub signature: FailureSignature,
    pub core_mode: CoreRiskMode,
    pub render_seed: u64,
}

/// `(base_risk, risk)` with `base = sum w_k r_k` and `risk = base (1 + lambda rarity)`.
pub fn aggregate_risk(r: &ErrorVector, rarity: f64, weights: &[f64], lambda: f64) -> (f64, f64) {
    let base: f64 = r.0.iter().zip(weights).map(|(r, w)| w * r).sum();
    (base, base * (1.0 + lambda * rarity))
}

/// Strict thresholding: bit `k` is set iff `r_k > tau_k`.
pub fn signature(r: &ErrorVector, thresholds: &[f64]) -> FailureSignature {
    FailureSignature(r.0.iter().zip(thresholds).map(|(r, t)| r > t).collect())
}

/// Render noise for component `k`, uniform on `[-sigma, sigma]`.
pub fn render_noise(z: &BitVector, render_seed: u64, k: usize, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut parts = vec![purpose::NOISE, z.len() as u64];
    parts.extend(z.words());
    parts.push(render_seed);
    parts.push(k as u64);
    let u = seeding::unit_f64(seeding::mix(&parts));
    sigma * (2.0 * u - 1.0)
}

/// Oracle bound to one schema, profile and set of reference statistics.
#[derive(Debug, Clone)]
pub struct Oracle {
    schema: Arc<FeatureSchema>,
    profile: LandscapeProfile,
    terms: TermTable,
    stats: CompiledStats,
    component_names: Vec<String>,
    weights: Vec<f64>,
    thresholds: Vec<f64>,
}

impl Oracle {
    pub fn new(
        schema: Arc<FeatureSchema>,
        profile: LandscapeProfile,
        stats: &ReferenceStats,
    ) -> Result<Self, OracleError> {
        profile.validate()?;
        let terms = profile.compile(&schema)?;
        let stats = stats.compile(&schema)?;
        Ok(Self {
            component_names: profile.component_names(),
            weights: profile.weights(),
            thresholds: profile.thresholds(),
            schema,
            profile,
            terms,
            stats,
        })
    }

    /// Oracle with the schema's default reference statistics.
    pub fn with_default_stats(schema: Arc<FeatureSchema>, profile: LandscapeProfile) -> Result<Self, OracleError> {
        let stats = ReferenceStats::default_for(&schema);
        Self::new(schema, profile, &stats)
    }

    /// Same landscape with render noise disabled.
    pub fn noiseless(&self) -> Self {
        let mut o = self.clone();
        o.profile.noise_sigma = 0.0;
        o
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn profile(&self) -> &LandscapeProfile {
        &self.profile
    }

    pub fn component_names(&self) -> &[String] {
        &self.component_names
    }

    pub fn latents(&self, z: &BitVector) -> Result<Latents, OracleError> {
        Ok(Latents::from_indices(&self.schema, self.schema.decode_indices(z)?))
    }

    pub fn component_errors(&self, z: &BitVector, latents: &Latents, render_seed: u64) -> ErrorVector {
        let sigma = self.profile.noise_sigma;
        ErrorVector(
            (0..self.terms.components.len())
                .map(|k| {
                    let raw = self.terms.raw(k, latents) + render_noise(z, render_seed, k, sigma);
                    raw.clamp(0.0, 1.0)
                })
                .collect(),
        )
    }

    pub fn evaluate(&self, z: &BitVector, render_seed: u64) -> Result<Evaluation, OracleError> {
        let latents = self.latents(z)?;
        let r = self.component_errors(z, &latents, render_seed);
        let rarity = self.stats.rarity(latents.indices());
        let (base_risk, risk) = aggregate_risk(&r, rarity, &self.weights, self.profile.lambda);
        let signature = signature(&r, &self.thresholds);
        let core_mode = core_risk_mode(&latents, &signature, &self.component_names);
        Ok(Evaluation {
            bits: z.clone(),
            features: self.schema.assignment_from_indices(latents.indices()),
            r,
            base_risk,
            rarity,
            risk,
            signature,
            core_mode,
            render_seed,
        })
    }
}
