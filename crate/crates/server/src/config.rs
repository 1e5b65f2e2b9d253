//! Server configuration: a JSON file plus environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use mlfix_core::agents::{HttpProvider, HttpProviderConfig, LlmProvider, StubProvider, UnavailableProvider};
use serde::{Deserialize, Serialize};

pub const ENV_API_KEY: &str = "MLFIX_LLM_API_KEY";
pub const ENV_ENDPOINT: &str = "MLFIX_LLM_ENDPOINT";
pub const ENV_KB_PATH: &str = "MLFIX_KB_PATH";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    /// Chat-completion URL; when absent and no fixtures are given the server
    /// runs in degraded rule-based mode.
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub call_timeout_secs: u64,
    /// Stub fixture file (prompt hash → completion). Takes precedence over
    /// `endpoint`.
    pub fixtures: Option<PathBuf>,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            api_key: None,
            model: "gpt-4o-mini".into(),
            call_timeout_secs: 60,
            fixtures: None,
        }
    }
}

impl ProviderSettings {
    pub fn build(&self) -> Result<Box<dyn LlmProvider>, ConfigError> {
        if let Some(path) = &self.fixtures {
            let stub = StubProvider::from_file(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            return Ok(Box::new(stub));
        }
        Ok(match &self.endpoint {
            Some(endpoint) => {
                let mut cfg = HttpProviderConfig::new(endpoint.clone());
                cfg.api_key = self.api_key.clone();
                cfg.model = self.model.clone();
                cfg.call_timeout = Duration::from_secs(self.call_timeout_secs);
                Box::new(HttpProvider::new(cfg))
            }
            None => Box::new(UnavailableProvider),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// 0 disables the response cache.
    pub cache_capacity: usize,
    pub consensus_k: usize,
    pub request_timeout_secs: u64,
    /// Directory of knowledge-base documents; the shipped corpus when absent.
    pub kb_path: Option<PathBuf>,
    pub provider: ProviderSettings,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            cache_capacity: 256,
            consensus_k: 5,
            request_timeout_secs: 120,
            kb_path: None,
            provider: ProviderSettings::default(),
        }
    }
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Apply the environment overrides, read through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(key) = var(ENV_API_KEY) {
            self.provider.api_key = Some(key);
        }
        if let Some(endpoint) = var(ENV_ENDPOINT) {
            self.provider.endpoint = Some(endpoint);
        }
        if let Some(kb) = var(ENV_KB_PATH) {
            self.kb_path = Some(PathBuf::from(kb));
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.consensus_k == 0 || self.consensus_k.is_multiple_of(2) {
            return Err(ConfigError::Invalid(format!(
                "consensus_k must be odd and at least 1, got {}",
                self.consensus_k
            )));
        }
        if self.request_timeout_secs == 0 {
            return Err(ConfigError::Invalid("request_timeout_secs must be positive".into()));
        }
        Ok(())
    }
}
