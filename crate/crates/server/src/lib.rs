//! HTTP analysis service: validates artifact bundles, runs the analysis
//! pipeline and memoizes diagnoses by bundle hash.

pub mod config;

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use mlfix_core::agents::{LlmProvider, Pipeline, PipelineConfig};
use mlfix_core::artifact::codec::{bundle_hash, decode_bundle, encode, CodecError};
use mlfix_core::kb::{load_dir, seed_corpus, KbIndex};
use serde_json::json;

pub use config::{ConfigError, ProviderSettings, ServerConfig};

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;
pub const PROBE_TIMEOUT: Duration = Duration::from_secs(1);
pub const PROBE_TTL: Duration = Duration::from_secs(30);

#[derive(Default)]
struct Metrics {
    requests_total: AtomicU64,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    /// (completed analyses, total seconds)
    diagnosis_time: Mutex<(u64, f64)>,
}

pub struct AppState {
    pipeline: Arc<Pipeline>,
    provider: Arc<dyn LlmProvider>,
    cache: Option<Mutex<LruCache<String, Bytes>>>,
    request_timeout: Duration,
    metrics: Metrics,
    probe: Mutex<Option<(Instant, bool)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("knowledge base: {0}")]
    Kb(#[from] mlfix_core::kb::KbError),
}

impl AppState {
    pub fn new(
        pipeline: Pipeline,
        provider: Arc<dyn LlmProvider>,
        cache_capacity: usize,
        request_timeout: Duration,
    ) -> Self {
        Self {
            pipeline: Arc::new(pipeline),
            provider,
            cache: NonZeroUsize::new(cache_capacity).map(|c| Mutex::new(LruCache::new(c))),
            request_timeout,
            metrics: Metrics::default(),
            probe: Mutex::new(None),
        }
    }

    pub fn from_config(config: &ServerConfig) -> Result<Self, StartupError> {
        config.validate()?;
        let docs = match &config.kb_path {
            Some(dir) => load_dir(dir)?,
            None => seed_corpus(),
        };
        let kb = Arc::new(KbIndex::build(docs)?);
        let pipeline = Pipeline::new(
            kb,
            PipelineConfig {
                consensus_k: config.consensus_k,
                ..PipelineConfig::default()
            },
        );
        let provider: Arc<dyn LlmProvider> = config.provider.build()?.into();
        Ok(Self::new(
            pipeline,
            provider,
            config.cache_capacity,
            Duration::from_secs(config.request_timeout_secs),
        ))
    }

    fn cached(&self, key: &str) -> Option<Bytes> {
        self.cache.as_ref()?.lock().ok()?.get(key).cloned()
    }

    fn store(&self, key: String, body: Bytes) {
        if let Some(Ok(mut cache)) = self.cache.as_ref().map(Mutex::lock) {
            cache.put(key, body);
        }
    }

    fn record_duration(&self, seconds: f64) {
        if let Ok(mut t) = self.metrics.diagnosis_time.lock() {
            t.0 += 1;
            t.1 += seconds;
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/analyze", post(analyze))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

fn error(status: StatusCode, message: String, field_path: Option<&str>) -> Response {
    let mut body = json!({ "error": message });
    if let Some(path) = field_path {
        body["field_path"] = json!(path);
    }
    (status, Json(body)).into_response()
}

fn diagnosis_response(body: Bytes, cache: &'static str) -> Response {
    let mut resp = body.into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert("x-cache", HeaderValue::from_static(cache));
    resp
}

async fn analyze(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    state.metrics.requests_total.fetch_add(1, Ordering::Relaxed);
    let bundle = match decode_bundle(&body) {
        Ok(b) => b,
        Err(e @ CodecError::Syntax(_)) => return error(StatusCode::BAD_REQUEST, e.to_string(), None),
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), e.field_path()),
    };
    let key = match bundle_hash(&bundle) {
        Ok(k) => k,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), e.field_path()),
    };
    let short = key[..12].to_string();
    let short = short.as_str();

    if let Some(hit) = state.cached(&key) {
        state.metrics.cache_hits.fetch_add(1, Ordering::Relaxed);
        tracing::info!(bundle = short, cache = "hit", "analyze");
        return diagnosis_response(hit, "hit");
    }
    state.metrics.cache_misses.fetch_add(1, Ordering::Relaxed);

    let started = Instant::now();
    let (pipeline, provider) = (state.pipeline.clone(), state.provider.clone());
    let job = tokio::task::spawn_blocking(move || pipeline.run(&bundle, provider.as_ref()));
    let diagnosis = match tokio::time::timeout(state.request_timeout, job).await {
        Ok(Ok(d)) => d,
        Ok(Err(e)) => {
            tracing::error!(bundle = short, error = %e, "analysis task failed");
            return error(StatusCode::INTERNAL_SERVER_ERROR, "analysis task failed".into(), None);
        }
        Err(_) => {
            tracing::warn!(bundle = short, "analysis timed out");
            return error(
                StatusCode::GATEWAY_TIMEOUT,
                format!("analysis exceeded {}s", state.request_timeout.as_secs_f64()),
                None,
            );
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    state.record_duration(elapsed);

    let bytes = match encode(&diagnosis) {
        Ok(b) => Bytes::from(b),
        Err(e) => {
            tracing::error!(bundle = short, error = %e, "diagnosis failed validation");
            return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), e.field_path());
        }
    };
    // a degraded answer is not memoized so a recovered provider gets a chance
    if !diagnosis.degraded {
        state.store(key, bytes.clone());
    }
    tracing::info!(
        bundle = short,
        cache = "miss",
        degraded = diagnosis.degraded,
        seconds = elapsed,
        "analyze"
    );
    diagnosis_response(bytes, "miss")
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let fresh = state
        .probe
        .lock()
        .ok()
        .and_then(|p| p.filter(|(at, _)| at.elapsed() < PROBE_TTL));
    let reachable = match fresh {
        Some((_, ok)) => ok,
        None => {
            let provider = state.provider.clone();
            let probe = tokio::task::spawn_blocking(move || provider.probe(PROBE_TIMEOUT));
            let ok = matches!(
                tokio::time::timeout(PROBE_TIMEOUT + Duration::from_millis(250), probe).await,
                Ok(Ok(true))
            );
            if let Ok(mut p) = state.probe.lock() {
                *p = Some((Instant::now(), ok));
            }
            ok
        }
    };
    Json(json!({
        "status": "ok",
        "provider_reachable": reachable,
        "kb_documents": state.pipeline.kb.len(),
    }))
    .into_response()
}

async fn metrics(State(state): State<Arc<AppState>>) -> String {
    let m = &state.metrics;
    let (count, total) = m.diagnosis_time.lock().map(|t| *t).unwrap_or_default();
    let mean = if count == 0 { 0.0 } else { total / count as f64 };
    format!(
        "requests_total {}\ncache_hits {}\ncache_misses {}\nmean_diagnosis_seconds {mean:.6}\n",
        m.requests_total.load(Ordering::Relaxed),
        m.cache_hits.load(Ordering::Relaxed),
        m.cache_misses.load(Ordering::Relaxed),
    )
}
