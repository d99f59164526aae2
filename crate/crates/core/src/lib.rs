//! Budgeted black-box search for diverse high-risk document configurations.
//!
//! A configuration is a fixed-width bit vector over a declarative feature
//! schema. A surrogate oracle maps each configuration to an error vector, a
//! rarity-weighted risk, a failure signature and a core risk mode. Fourteen
//! search strategies share one propose/observe interface and are run under
//! identical budgets by the harness; the analytics and predictor modules
//! summarize what each strategy found.

pub mod analytics;
pub mod harness;
pub mod oracle;
pub mod predictor;
pub mod quantum;
pub mod schema;
pub mod seeding;
pub mod solvers;

pub use oracle::{Evaluation, LandscapeProfile, Oracle, OracleError, ReferenceStats};
pub use schema::{BitVector, FeatureAssignment, FeatureSchema, SchemaError};
