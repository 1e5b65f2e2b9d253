//! `mlfix analyze`: submit a bundle to a server, or run the pipeline
//! in-process.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mlfix_core::agents::{
    echo_reply, HttpProvider, HttpProviderConfig, LlmProvider, Pipeline, PipelineConfig, StubProvider,
    UnavailableProvider,
};
use mlfix_core::artifact::codec::{decode_bundle, encode};
use mlfix_core::artifact::{ArtifactBundle, Diagnosis};
use mlfix_core::kb::{load_dir, seed_corpus, KbIndex};

use crate::error::{write_atomic, CliError};

pub const ENV_API_KEY: &str = "MLFIX_LLM_API_KEY";
pub const ENV_ENDPOINT: &str = "MLFIX_LLM_ENDPOINT";
pub const ENV_KB_PATH: &str = "MLFIX_KB_PATH";

/// POST the bundle bytes and write the response body verbatim to `out`.
pub fn submit(bundle_path: &Path, server_url: &str, timeout: Duration, out: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(bundle_path).map_err(|e| CliError::io(bundle_path, e))?;
    serde_json::from_slice::<serde::de::IgnoredAny>(&bytes)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", bundle_path.display())))?;

    let url = if server_url.trim_end_matches('/').ends_with("/analyze") {
        server_url.to_string()
    } else {
        format!("{}/analyze", server_url.trim_end_matches('/'))
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(&url)
        .header("content-type", "application/json")
        .send(&bytes[..])
        .map_err(|e| CliError::Network(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .with_config()
        .limit(256 << 20)
        .read_to_vec()
        .map_err(|e| CliError::Network(format!("{url}: {e}")))?;
    if status != 200 {
        return Err(CliError::Rejected {
            status,
            body: String::from_utf8_lossy(&body).into_owned(),
        });
    }
    write_atomic(out, &body)
}

/// Settings for in-process analysis.
#[derive(Debug, Clone, Default)]
pub struct OfflineOptions {
    /// Stub fixture file; takes precedence over an HTTP endpoint.
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub kb_dir: Option<PathBuf>,
    pub consensus_k: Option<usize>,
    pub seed: Option<u64>,
}

impl OfflineOptions {
    /// Fill unset provider and corpus settings from the environment.
    pub fn with_env(mut self, var: impl Fn(&str) -> Option<String>) -> Self {
        self.endpoint = self.endpoint.or_else(|| var(ENV_ENDPOINT));
        self.api_key = self.api_key.or_else(|| var(ENV_API_KEY));
        self.kb_dir = self.kb_dir.or_else(|| var(ENV_KB_PATH).map(PathBuf::from));
        self
    }

    pub fn pipeline(&self) -> Result<Pipeline, CliError> {
        let docs = match &self.kb_dir {
            Some(dir) => load_dir(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?,
            None => seed_corpus(),
        };
        let kb = KbIndex::build(docs).map_err(|e| CliError::Input(e.to_string()))?;
        let defaults = PipelineConfig::default();
        let config = PipelineConfig {
            consensus_k: self.consensus_k.unwrap_or(defaults.consensus_k),
            base_seed: self.seed.unwrap_or(defaults.base_seed),
            ..defaults
        };
        config.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Pipeline::new(Arc::new(kb), config))
    }

    pub fn provider(&self) -> Result<Box<dyn LlmProvider>, CliError> {
        if let Some(path) = &self.fixtures {
            return Ok(Box::new(StubProvider::from_file(path).map_err(|e| CliError::io(path, e))?));
        }
        Ok(match &self.endpoint {
            Some(endpoint) => {
                let mut cfg = HttpProviderConfig::new(endpoint.clone());
                cfg.api_key = self.api_key.clone();
                Box::new(HttpProvider::new(cfg))
            }
            None => Box::new(UnavailableProvider),
        })
    }
}

pub fn read_bundle(path: &Path) -> Result<ArtifactBundle, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_bundle(&bytes).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

/// Run the full pipeline in-process and write the canonical diagnosis.
pub fn analyze_offline(bundle_path: &Path, options: &OfflineOptions, out: &Path) -> Result<Diagnosis, CliError> {
    let bundle = read_bundle(bundle_path)?;
    let pipeline = options.pipeline()?;
    let provider = options.provider()?;
    let diagnosis = pipeline.run(&bundle, provider.as_ref());
    let bytes = encode(&diagnosis).map_err(|e| CliError::Malformed(e.to_string()))?;
    write_atomic(out, &bytes)?;
    Ok(diagnosis)
}

/// Record stub fixtures for every prompt the pipeline issues on the bundle,
/// answering with replies that restate the rule-based reasoning.
pub fn record_fixtures(bundle_path: &Path, options: &OfflineOptions, out: &Path) -> Result<usize, CliError> {
    let bundle = read_bundle(bundle_path)?;
    let pipeline = options.pipeline()?;
    let fixtures = pipeline
        .record_fixtures(&bundle, echo_reply)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let sorted: BTreeMap<_, _> = fixtures.into_iter().collect();
    let mut text = serde_json::to_string_pretty(&sorted).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    Ok(sorted.len())
}
