//! Discrete risk-feature space and its fixed-width binary encoding.
//!
//! Every feature is written base-2, most-significant bit first, into a
//! contiguous bit range. Decoding clamps out-of-range codes to the largest
//! valid value index, so every bitstring of the right length is a valid
//! configuration and bit-flip operators never leave the space.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate feature `{0}`")]
    DuplicateFeature(String),
    #[error("feature `{name}`: {bits} bits cannot encode {cardinality} values")]
    WidthTooSmall { name: String, bits: u32, cardinality: u32 },
    #[error("schema has no encoded features")]
    EmptySchema,
    #[error("invalid feature `{name}`: {reason}")]
    InvalidFeature { name: String, reason: String },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{name}`: value {value} out of range (cardinality {cardinality})")]
    ValueOutOfRange { name: String, value: u32, cardinality: u32 },
    #[error("missing value for feature `{0}`")]
    MissingFeature(String),
    #[error("bitvector length {actual} does not match schema width {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid bit string: {0}")]
    BadBitString(String),
    #[error("unknown built-in schema `{0}`")]
    UnknownBuiltin(String),
    #[error("cannot read schema file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse schema file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Ordinal,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub cardinality: u32,
    #[serde(default)]
    pub bits: u32,
    /// Frozen value index; such a feature occupies no bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<u32>,
}

impl FeatureSpec {
    pub fn is_fixed(&self) -> bool {
        self.fixed.is_some()
    }

    /// Largest value index, used to normalize ordinal values into `[0, 1]`.
    pub fn max_index(&self) -> u32 {
        self.cardinality.saturating_sub(1)
    }

    /// Number of values a configuration can actually take.
    pub fn reachable_values(&self) -> u32 {
        if self.is_fixed() {
            1
        } else {
            self.cardinality
        }
    }
}

/// On-disk form of a schema (TOML or JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub name: String,
    #[serde(rename = "feature")]
    pub features: Vec<FeatureSpec>,
}

/// Validated feature schema. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    name: String,
    features: Vec<FeatureSpec>,
    offsets: Vec<usize>,
    total_bits: usize,
}

/// Size of the configuration space, at bit level and after decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSize {
    pub bit_space: u128,
    pub semantic: u128,
}

pub const BUILTIN_SCHEMAS: [&str; 3] = ["single_page_24", "multi_page_27", "mini_8"];

impl FeatureSchema {
    pub fn build(doc: SchemaDocument) -> Result<Self, SchemaError> {
        if doc.features.is_empty() {
            return Err(SchemaError::EmptySchema);
        }
        let mut seen = HashSet::new();
        let mut offsets = Vec::with_capacity(doc.features.len());
        let mut total = 0usize;
        for f in &doc.features {
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
            if f.name.is_empty() {
                return Err(SchemaError::InvalidFeature { name: f.name.clone(), reason: "empty name".into() });
            }
            match f.fixed {
                Some(v) => {
                    if f.bits != 0 {
                        return Err(SchemaError::InvalidFeature {
                            name: f.name.clone(),
                            reason: "fixed features must have 0 bits".into(),
                        });
                    }
                    if f.cardinality == 0 || v >= f.cardinality {
                        return Err(SchemaError::ValueOutOfRange {
                            name: f.name.clone(),
                            value: v,
                            cardinality: f.cardinality,
                        });
                    }
                }
                None => {
                    if f.cardinality < 2 {
                        return Err(SchemaError::InvalidFeature {
                            name: f.name.clone(),
                            reason: "cardinality must be at least 2".into(),
                        });
                    }
                    if f.bits == 0 || f.bits > 31 || (1u64 << f.bits) < f.cardinality as u64 {
                        return Err(SchemaError::WidthTooSmall {
                            name: f.name.clone(),
                            bits: f.bits,
                            cardinality: f.cardinality,
                        });
                    }
                }
            }
            offsets.push(total);
            total += f.bits as usize;
        }
        if total == 0 {
            return Err(SchemaError::EmptySchema);
        }
        Ok(Self { name: doc.name, features: doc.features, offsets, total_bits: total })
    }

    pub fn builtin(name: &str) -> Result<Self, SchemaError> {
        let text = match name {
            "single_page_24" => include_str!("../data/schemas/single_page_24.toml"),
            "multi_page_27" => include_str!("../data/schemas/multi_page_27.toml"),
            "mini_8" => include_str!("../data/schemas/mini_8.toml"),
            _ => return Err(SchemaError::UnknownBuiltin(name.to_string())),
        };
        Self::from_toml_str(text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let doc: SchemaDocument = toml::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        Self::build(doc)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SchemaError> {
        let doc: SchemaDocument = serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        Self::build(doc)
    }

    /// Loads a schema file (`.json`, otherwise TOML).
    pub fn from_file(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    /// Resolves a built-in name or a path to a schema file.
    pub fn resolve(name_or_path: &str) -> Result<Self, SchemaError> {
        if BUILTIN_SCHEMAS.contains(&name_or_path) {
            Self::builtin(name_or_path)
        } else {
            Self::from_file(Path::new(name_or_path))
        }
    }

    pub fn to_document(&self) -> SchemaDocument {
        SchemaDocument { name: self.name.clone(), features: self.features.clone() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Bit range of feature `i` (empty for fixed features).
    pub fn bit_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.offsets[i];
        start..start + self.features[i].bits as usize
    }

    /// Decodes to per-feature value indices in declaration order.
    pub fn decode_indices(&self, z: &BitVector) -> Result<Vec<u32>, SchemaError> {
        if z.len() != self.total_bits {
            return Err(SchemaError::LengthMismatch { expected: self.total_bits, actual: z.len() });
        }
        Ok(self.decode_indices_unchecked(z))
    }

    pub(crate) fn decode_indices_unchecked(&self, z: &BitVector) -> Vec<u32> {
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| match f.fixed {
                Some(v) => v,
                None => {
                    let raw = self.bit_range(i).fold(0u32, |acc, b| (acc << 1) | z.get(b) as u32);
                    raw.min(f.cardinality - 1)
                }
            })
            .collect()
    }

    pub fn decode(&self, z: &BitVector) -> Result<FeatureAssignment, SchemaError> {
        let idx = self.decode_indices(z)?;
        Ok(self.assignment_from_indices(&idx))
    }

    pub fn assignment_from_indices(&self, idx: &[u32]) -> FeatureAssignment {
        FeatureAssignment(self.features.iter().zip(idx).map(|(f, &v)| (f.name.clone(), v)).collect())
    }

    /// Value indices of a validated assignment, in declaration order.
    pub fn indices_of(&self, a: &FeatureAssignment) -> Result<Vec<u32>, SchemaError> {
        for name in a.0.keys() {
            if self.index_of(name).is_none() {
                return Err(SchemaError::UnknownFeature(name.clone()));
            }
        }
        self.features
            .iter()
            .map(|f| {
                let v = *a.0.get(&f.name).ok_or_else(|| SchemaError::MissingFeature(f.name.clone()))?;
                if v >= f.cardinality {
                    return Err(SchemaError::ValueOutOfRange {
                        name: f.name.clone(),
                        value: v,
                        cardinality: f.cardinality,
                    });
                }
                if let Some(fixed) = f.fixed {
                    if v != fixed {
                        return Err(SchemaError::ValueOutOfRange {
                            name: f.name.clone(),
                            value: v,
                            cardinality: f.cardinality,
                        });
                    }
                }
                Ok(v)
            })
            .collect()
    }

    pub fn encode(&self, a: &FeatureAssignment) -> Result<BitVector, SchemaError> {
        let idx = self.indices_of(a)?;
        Ok(self.encode_indices(&idx))
    }

    pub(crate) fn encode_indices(&self, idx: &[u32]) -> BitVector {
        let mut z = BitVector::zeros(self.total_bits);
        for (i, f) in self.features.iter().enumerate() {
            if f.is_fixed() {
                continue;
            }
            let range = self.bit_range(i);
            let width = range.len();
            for (k, b) in range.enumerate() {
                z.set(b, (idx[i] >> (width - 1 - k)) & 1 == 1);
            }
        }
        z
    }

    pub fn space_size(&self) -> SpaceSize {
        let semantic = self.features.iter().map(|f| f.reachable_values() as u128).product();
        SpaceSize { bit_space: 1u128 << self.total_bits, semantic }
    }

    /// Uniform bitvector: every bit independent and fair.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVector {
        BitVector::random(self.total_bits, rng)
    }
}

/// Map from feature name to 0-based value index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureAssignment(pub BTreeMap<String, u32>);

impl FeatureAssignment {
    pub fn get(&self, name: &str) -> Option<u32> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: u32) {
        self.0.insert(name.to_string(), value);
    }
}

/// Fixed-length binary configuration, serialized as a `0`/`1` string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random::<bool>()).collect())
    }

    /// The `n`-bit vector whose MSB-first value is `value`.
    pub fn from_index(value: u64, n: usize) -> Self {
        Self((0..n).map(|i| (value >> (n - 1 - i)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn hamming(&self, other: &BitVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn complement(&self) -> BitVector {
        Self(self.0.iter().map(|b| !b).collect())
    }

    /// Bits packed into 64-bit words, LSB = bit 0 of each word.
    pub fn words(&self) -> Vec<u64> {
        self.0.chunks(64).map(|c| c.iter().enumerate().fold(0u64, |w, (i, &b)| w | ((b as u64) << i))).collect()
    }

    /// MSB-first integer value; only meaningful for `len() <= 64`.
    pub fn to_index(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(SchemaError::BadBitString(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitVector)
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
