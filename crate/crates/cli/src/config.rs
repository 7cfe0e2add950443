//! Run configuration file: every stage's settings in one JSON object.

use serde::{Deserialize, Serialize};

use edmol_core::density::DensityConfig;
use edmol_core::generate::GenerationConfig;
use edmol_core::geom::{DiscretizationParams, ToleranceConfig};
use edmol_core::model::{ModelConfig, TrainConfig};

/// Sampling settings; the seed and tolerances live at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub temperature: f64,
    pub max_tokens: Option<usize>,
    pub n_samples: usize,
    pub max_retries: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        let g = GenerationConfig::default();
        GenerationSettings {
            temperature: g.temperature,
            max_tokens: g.max_tokens,
            n_samples: g.n_samples,
            max_retries: g.max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub density: DensityConfig,
    pub discretization: DiscretizationParams,
    pub tolerances: ToleranceConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub generation: GenerationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            density: DensityConfig::default(),
            discretization: DiscretizationParams::default(),
            tolerances: ToleranceConfig::default(),
            model: ModelConfig::toy(),
            train: TrainConfig::toy(),
            generation: GenerationSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn generation_config(&self) -> GenerationConfig {
        let g = &self.generation;
        GenerationConfig {
            temperature: g.temperature,
            max_tokens: g.max_tokens,
            n_samples: g.n_samples,
            seed: self.seed,
            tolerances: self.tolerances,
            max_retries: g.max_retries,
        }
    }
}
