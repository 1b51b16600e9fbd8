//! Local optima network (LON) sampling and analysis for modular robot
//! morpho-evolution.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: modules, controllers, phenotype trees and their canonical hashes.
//! - [`encodings`]: direct, L-System and CPPN genotypes with expression and mutation.
//! - [`evaluate`]: the locomotion surrogate, the kill-switch and the external evaluator protocol.
//! - [`sampler`]: iterated local search producing [`sampler::RunLog`]s.
//! - [`lon`]: merging run logs into a monotonic LON and computing its metrics and exports.
//! - [`stats`]: Mann-Whitney U tests for comparing encodings.

pub mod encodings;
pub mod evaluate;
pub mod hash;
pub mod lon;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use encodings::{Encoding, Genotype, MutationRates};
pub use evaluate::{Evaluator, EvaluatorConfig, EvaluatorKind, Fitness};
pub use lon::{Lon, LonSummary};
pub use model::{ControllerParams, Module, ModuleList, PhenotypeNode, PhenotypeTree, Shape};
pub use rng::RngStream;
pub use sampler::{IlsConfig, RunLog};

/// Schema version stamped on every persisted artifact.
pub const SCHEMA_VERSION: u32 = 1;
