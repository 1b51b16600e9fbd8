//! Experiment configuration file.

use std::path::{Path, PathBuf};

use lonscape::encodings::{Encoding, MutationRates};
use lonscape::evaluate::EvaluatorConfig;
use lonscape::hash::{fnv1a64, to_hex};
use lonscape::sampler::IlsConfig;
use lonscape::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything needed to reproduce a sampling experiment. Missing fields take
/// their defaults; `rates` defaults to the encoding's standard rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub encoding: Encoding,
    pub runs: usize,
    pub ls_stall_budget: usize,
    pub perturbation_strength: usize,
    pub run_stall_limit: usize,
    pub run_iteration_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<MutationRates>,
    pub base_seed: u64,
    pub fitness_equality_tolerance: f64,
    pub evaluator: EvaluatorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ils = IlsConfig::new(Encoding::Direct);
        Self {
            schema: SCHEMA_VERSION,
            encoding: ils.encoding,
            runs: ils.runs,
            ls_stall_budget: ils.ls_stall_budget,
            perturbation_strength: ils.perturbation_strength,
            run_stall_limit: ils.run_stall_limit,
            run_iteration_limit: ils.run_iteration_limit,
            rates: None,
            base_seed: ils.base_seed,
            fitness_equality_tolerance: ils.fitness_equality_tolerance,
            evaluator: EvaluatorConfig::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        if let Some(schema) = v.get("schema") {
            if schema.as_u64() != Some(u64::from(SCHEMA_VERSION)) {
                return Err(CliError::Schema(format!(
                    "config schema {schema} is not supported (expected {SCHEMA_VERSION})"
                )));
            }
        }
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn ils(&self) -> IlsConfig {
        IlsConfig {
            encoding: self.encoding,
            runs: self.runs,
            ls_stall_budget: self.ls_stall_budget,
            perturbation_strength: self.perturbation_strength,
            run_stall_limit: self.run_stall_limit,
            run_iteration_limit: self.run_iteration_limit,
            rates: self.rates.unwrap_or_else(|| MutationRates::for_encoding(self.encoding)),
            base_seed: self.base_seed,
            fitness_equality_tolerance: self.fitness_equality_tolerance,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "config schema {} is not supported",
                self.schema
            )));
        }
        self.ils().validate().map_err(CliError::Config)?;
        self.evaluator.validate().map_err(CliError::Config)
    }

    /// FNV-1a of the compact JSON form, ignoring the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        to_hex(fnv1a64(&serde_json::to_vec(&c).expect("config serialises")))
    }
}
