//! Normalized document latents feeding the landscape term tables.

use crate::schema::{FeatureAssignment, FeatureSchema, SchemaError};

/// Named latents derived from a decoded configuration.
///
/// Counts are normalized as `value / max_index`; features absent from the
/// schema contribute 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub d: f64,
    pub eta: f64,
    pub kv_n: f64,
    pub text_n: f64,
    pub rows_n: f64,
    pub cols_n: f64,
    pub srows_n: f64,
    pub scols_n: f64,
    pub pages_n: f64,
    pub s_soft: f64,
    pub s_hard: f64,
    pub cont: f64,
    pub slast: f64,
    pub template: Option<u32>,
    pub noise_level: Option<u32>,
    pub layout_split: Option<u32>,
    /// Per-feature value indices, declaration order.
    pub(crate) indices: Vec<u32>,
    /// Per-feature normalized values, declaration order.
    pub(crate) normalized: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedLatent {
    D,
    Eta,
    KvN,
    TextN,
    RowsN,
    ColsN,
    SrowsN,
    ScolsN,
    PagesN,
    SSoft,
    SHard,
    Cont,
    Slast,
}

/// A resolved reference to one latent scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentRef {
    Named(NamedLatent),
    Template(u32),
    Normalized(usize),
    Indicator(usize, u32),
}

pub(crate) const TEMPLATE: &str = "TEMPLATE_ID";
pub(crate) const NUM_PAGES: &str = "NUM_PAGES";
pub(crate) const MAX_KV: &str = "MAX_KV";
pub(crate) const MAX_TEXT: &str = "MAX_TEXT";
pub(crate) const TBL_ROWS: &str = "MAX_TBL_ROWS";
pub(crate) const TBL_COLS: &str = "MAX_TBL_COLS";
pub(crate) const SUMMARY_ROWS: &str = "MAX_SUMMARY_ROWS";
pub(crate) const SUMMARY_COLS: &str = "MAX_SUMMARY_COLS";
pub(crate) const NOISE_LEVEL: &str = "NOISE_LEVEL";
pub(crate) const TABLE_CONTINUE: &str = "TABLE_CONTINUE_PAGE";
pub(crate) const LAYOUT_SPLIT: &str = "LAYOUT_SPLIT";
pub(crate) const SUMMARY_LAST: &str = "SUMMARY_LAST_PAGE";

impl NamedLatent {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "d" => Self::D,
            "eta" => Self::Eta,
            "kv_n" => Self::KvN,
            "text_n" => Self::TextN,
            "rows_n" => Self::RowsN,
            "cols_n" => Self::ColsN,
            "srows_n" => Self::SrowsN,
            "scols_n" => Self::ScolsN,
            "pages_n" => Self::PagesN,
            "s_soft" => Self::SSoft,
            "s_hard" => Self::SHard,
            "cont" => Self::Cont,
            "slast" => Self::Slast,
            _ => return None,
        })
    }
}

impl LatentRef {
    /// Resolves a latent name against a schema.
    pub fn resolve(name: &str, schema: &FeatureSchema) -> Option<Self> {
        if let Some(n) = NamedLatent::parse(name) {
            return Some(Self::Named(n));
        }
        if let Some(rest) = name.strip_prefix('t') {
            if let Ok(t) = rest.parse::<u32>() {
                return Some(Self::Template(t));
            }
        }
        if let Some((feat, value)) = name.split_once('=') {
            let i = schema.index_of(feat.trim())?;
            let v = value.trim().parse::<u32>().ok()?;
            return (v < schema.features()[i].cardinality).then_some(Self::Indicator(i, v));
        }
        schema.index_of(name).map(Self::Normalized)
    }
}

impl Latents {
    pub fn from_indices(schema: &FeatureSchema, indices: Vec<u32>) -> Self {
        let features = schema.features();
        let normalized: Vec<f64> = features
            .iter()
            .zip(&indices)
            .map(|(f, &v)| match f.max_index() {
                0 => 0.0,
                m => v as f64 / m as f64,
            })
            .collect();
        let norm = |name: &str| schema.index_of(name).map_or(0.0, |i| normalized[i]);
        let index = |name: &str| schema.index_of(name).map(|i| indices[i]);
        let layout_split = index(LAYOUT_SPLIT);

        let kv_n = norm(MAX_KV);
        let text_n = norm(MAX_TEXT);
        let rows_n = norm(TBL_ROWS);
        let cols_n = norm(TBL_COLS);
        let srows_n = norm(SUMMARY_ROWS);
        let scols_n = norm(SUMMARY_COLS);
        Self {
            d: (kv_n + text_n + rows_n * cols_n + srows_n * scols_n) / 4.0,
            eta: norm(NOISE_LEVEL),
            kv_n,
            text_n,
            rows_n,
            cols_n,
            srows_n,
            scols_n,
            pages_n: norm(NUM_PAGES),
            s_soft: (layout_split == Some(1)) as u8 as f64,
            s_hard: (layout_split == Some(2)) as u8 as f64,
            cont: norm(TABLE_CONTINUE),
            slast: norm(SUMMARY_LAST),
            template: index(TEMPLATE),
            noise_level: index(NOISE_LEVEL),
            layout_split,
            indices,
            normalized,
        }
    }

    pub fn get(&self, r: LatentRef) -> f64 {
        match r {
            LatentRef::Named(n) => match n {
                NamedLatent::D => self.d,
                NamedLatent::Eta => self.eta,
                NamedLatent::KvN => self.kv_n,
                NamedLatent::TextN => self.text_n,
                NamedLatent::RowsN => self.rows_n,
                NamedLatent::ColsN => self.cols_n,
                NamedLatent::SrowsN => self.srows_n,
                NamedLatent::ScolsN => self.scols_n,
                NamedLatent::PagesN => self.pages_n,
                NamedLatent::SSoft => self.s_soft,
                NamedLatent::SHard => self.s_hard,
                NamedLatent::Cont => self.cont,
                NamedLatent::Slast => self.slast,
            },
            LatentRef::Template(t) => (self.template == Some(t)) as u8 as f64,
            LatentRef::Normalized(i) => self.normalized[i],
            LatentRef::Indicator(i, v) => (self.indices[i] == v) as u8 as f64,
        }
    }

    /// Looks a latent up by name (`None` if the name does not resolve).
    pub fn by_name(&self, schema: &FeatureSchema, name: &str) -> Option<f64> {
        LatentRef::resolve(name, schema).map(|r| self.get(r))
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

/// Normalized latents of a validated assignment.
pub fn derive_latents(features: &FeatureAssignment, schema: &FeatureSchema) -> Result<Latents, SchemaError> {
    Ok(Latents::from_indices(schema, schema.indices_of(features)?))
}
