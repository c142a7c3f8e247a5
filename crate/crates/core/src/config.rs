//! The run configuration read by the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GeneratorConfig;
use crate::generation::{HttpClientConfig, DEFAULT_MAX_PARALLEL, DEFAULT_TEMPERATURE};
use crate::geo::DistanceBins;
use crate::mechanism::PrivacyParams;
use crate::retrieval::RetrievalConfig;
use crate::semantics::{EmbeddingProvider, LexicalEmbedder, PrecomputedEmbeddings, SemanticsError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    pub epsilon: f64,
    pub scale_m: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        let p = PrivacyParams::default();
        Self {
            epsilon: p.epsilon,
            scale_m: p.scale_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbedderConfig {
    Lexical {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Precomputed {
        path: PathBuf,
    },
}

fn default_dim() -> usize {
    LexicalEmbedder::DEFAULT_DIM
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Lexical { dim: default_dim() }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, ConfigError> {
        Ok(match self {
            EmbedderConfig::Lexical { dim } => Arc::new(LexicalEmbedder::new(*dim)?),
            EmbedderConfig::Precomputed { path } => Arc::new(PrecomputedEmbeddings::load(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub enabled: bool,
    pub temperature: f64,
    pub max_parallel: usize,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: u64,
    pub retries: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let http = HttpClientConfig::default();
        Self {
            enabled: false,
            temperature: DEFAULT_TEMPERATURE,
            max_parallel: DEFAULT_MAX_PARALLEL,
            endpoint: http.endpoint,
            model: http.model,
            api_key_env: http.api_key_env,
            timeout_s: http.timeout_s,
            retries: http.retries,
        }
    }
}

impl GenerationConfig {
    pub fn http(&self) -> HttpClientConfig {
        HttpClientConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_s: self.timeout_s,
            retries: self.retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mechanism seeds for PAS evaluation.
    pub seeds: Vec<u64>,
    /// Seed for dataset generation.
    pub dataset_seed: u64,
    pub paths: Paths,
    pub bins: DistanceBins,
    pub privacy: PrivacyConfig,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub generation: GenerationConfig,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            dataset_seed: 42,
            paths: Paths::default(),
            bins: DistanceBins::default(),
            privacy: PrivacyConfig::default(),
            retrieval: RetrievalConfig::default(),
            embedder: EmbedderConfig::default(),
            generation: GenerationConfig::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.paths.dataset_dir);
        rebase(&mut cfg.paths.output_dir);
        if let EmbedderConfig::Precomputed { path } = &mut cfg.embedder {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn privacy_params(&self) -> Result<PrivacyParams, ConfigError> {
        PrivacyParams::new(self.privacy.epsilon, self.privacy.scale_m)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Range checks owned by the individual modules, plus file existence.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.privacy_params()?;
        self.retrieval
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.generator
            .validate(&self.bins)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.generation.temperature >= 0.0 && self.generation.temperature.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "generation temperature {} must be non-negative",
                self.generation.temperature
            )));
        }
        if let EmbedderConfig::Precomputed { path } = &self.embedder {
            if !path.is_file() {
                return Err(ConfigError::Invalid(format!(
                    "embedding file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Pretty JSON snapshot written next to each run's outputs.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
