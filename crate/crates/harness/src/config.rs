//! Experiment configuration: a JSON document whose keys mirror the CLI
//! flags one-to-one (flags win on conflict). Unknown keys are rejected and
//! the schema is versioned.

use crate::bench::EaTweaks;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problems: Vec<String>,
    pub dimensions: Vec<usize>,
    pub modes: Vec<String>,
    pub budget: f64,
    pub vtr: f64,
    pub master_seed: u64,
    pub repeats_per_size: usize,
    pub bisection_repeats: usize,
    pub min_population: usize,
    pub max_population: usize,
    /// Default three hours; enforced through the stop hook, never part of
    /// acceptance quantities.
    pub wall_clock_limit_secs: Option<f64>,
    pub output_dir: String,
    pub threads: Option<usize>,
    pub tweaks: EaTweaksConfig,
}

/// EA constant overrides, all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaTweaksConfig {
    pub tau: Option<f64>,
    pub p_accept: Option<f64>,
    pub ams_multiplier: Option<f64>,
    pub avs_decay: Option<f64>,
    pub sdr_threshold: Option<f64>,
    pub fi_shrink: Option<f64>,
    pub max_element_size: Option<usize>,
    pub pause_window: Option<usize>,
    pub pause_generations: Option<u64>,
    pub tests_per_generation: Option<usize>,
    pub max_generations: Option<u64>,
}

impl EaTweaksConfig {
    pub fn to_tweaks(&self) -> EaTweaks {
        EaTweaks {
            tau: self.tau,
            p_accept: self.p_accept,
            ams_multiplier: self.ams_multiplier,
            avs_decay: self.avs_decay,
            sdr_threshold: self.sdr_threshold,
            fi_shrink: self.fi_shrink,
            max_element_size: self.max_element_size,
            pause_window: self.pause_window,
            pause_generations: self.pause_generations,
            tests_per_generation: self.tests_per_generation,
            max_generations: self.max_generations,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            problems: Vec::new(),
            dimensions: Vec::new(),
            modes: Vec::new(),
            budget: 1e7,
            vtr: 1e-10,
            master_seed: 1,
            repeats_per_size: 30,
            bisection_repeats: 5,
            min_population: 8,
            max_population: 2048,
            wall_clock_limit_secs: Some(3.0 * 3600.0),
            output_dir: ".".into(),
            threads: None,
            tweaks: EaTweaksConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text =
            fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported config schema version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            ));
        }
        Ok(config)
    }
}
