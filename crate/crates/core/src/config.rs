//! TOML run configuration. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Aggregation;
use crate::orchestrator::AgentSpec;
use crate::priority::{ThresholdBand, Weights};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("missing required config key `{0}`")]
    MissingKey(String),
    #[error("invalid config value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot load {what}: {message}")]
    Resource { what: String, message: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }

    pub fn resource(what: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Resource { what: what.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Mock,
    Live,
}

impl BackendMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendMode::Mock => "mock",
            BackendMode::Live => "live",
        }
    }
}

impl std::str::FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(BackendMode::Mock),
            "live" => Ok(BackendMode::Live),
            other => Err(format!("unknown backend mode `{other}` (expected mock or live)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub base_url: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Scripted responses (JSON) consulted before the simulator in mock mode.
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    Hashed {
        dimension: usize,
        seed: u64,
    },
    Remote {
        base_url: String,
        model: String,
        dimension: usize,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSourceKind {
    Fixtures,
    Openfda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsConfig {
    pub source: LabelSourceKind,
    pub fixtures_dir: PathBuf,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_section_patterns")]
    pub section_patterns: Vec<String>,
}

fn default_section_patterns() -> Vec<String> {
    crate::retrieval::DEFAULT_FOOD_SECTION_PATTERNS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub corpus_dir: PathBuf,
    pub chunk_chars: usize,
    pub overlap_chars: usize,
    pub top_k: usize,
    pub embedding: EmbeddingConfig,
    pub labels: LabelsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConfig {
    pub rules: PathBuf,
    pub drug_classes: PathBuf,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhirConfig {
    pub mapping_table: PathBuf,
    #[serde(default = "default_date_time")]
    pub date_time: String,
    #[serde(default = "default_urgent")]
    pub urgent_threshold: f64,
}

fn default_date_time() -> String {
    "2025-01-01T00:00:00Z".into()
}

fn default_urgent() -> f64 {
    0.7
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Extra generic phrases, one per line.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub backend: BackendConfig,
    pub retrieval: RetrievalConfig,
    pub safety: SafetyConfig,
    pub weights: Weights,
    /// Severity bands per issue domain.
    #[serde(default)]
    pub bands: BTreeMap<String, ThresholdBand>,
    pub fhir: FhirConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Agent roster; the built-in roster is used when absent.
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
}

pub const REQUIRED_KEYS: [&str; 5] = ["backend", "retrieval", "safety", "weights", "fhir"];

/// A parsed config plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: PathBuf,
    pub base_dir: PathBuf,
    /// Raw file text, hashed into the run manifest.
    pub raw: String,
}

impl Config {
    pub fn from_toml(raw: &str) -> Result<Config, ConfigError> {
        let table: toml::Table = raw.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        if let Some(key) = REQUIRED_KEYS.iter().find(|k| !table.contains_key(**k)) {
            return Err(ConfigError::MissingKey(key.to_string()));
        }
        let de = toml::Deserializer::parse(raw).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if let Some(field) = msg.strip_prefix("missing field `").and_then(|m| m.strip_suffix('`')) {
                let full = if path == "." { field.to_string() } else { format!("{path}.{field}") };
                return ConfigError::MissingKey(full);
            }
            ConfigError::invalid(path, msg)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.backend.temperature != 0.0 {
            return Err(ConfigError::invalid("backend.temperature", "must be 0 for reproducible runs"));
        }
        if self.retrieval.top_k == 0 {
            return Err(ConfigError::invalid("retrieval.top_k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.safety.epsilon) || self.safety.epsilon == 0.0 {
            return Err(ConfigError::invalid("safety.epsilon", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.fhir.urgent_threshold) {
            return Err(ConfigError::invalid("fhir.urgent_threshold", "must lie in [0, 1]"));
        }
        self.weights.validate().map_err(|e| ConfigError::invalid("weights", e.to_string()))?;
        for (domain, band) in &self.bands {
            band.validate().map_err(|e| ConfigError::invalid(format!("bands.{domain}"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let config = Config::from_toml(&raw)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, path: path.to_path_buf(), base_dir, raw })
    }
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
