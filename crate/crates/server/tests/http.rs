#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mlfix_core::agents::{echo_reply, LlmProvider, Pipeline, ProviderError, StubProvider, StubReply, UnavailableProvider};
use mlfix_core::artifact::codec::encode_bundle;
use mlfix_core::artifact::{ArtifactBundle, Diagnosis, LlmRequest, LlmResponse};
use mlfix_server::{AppState, ServerConfig};
use serde_json::Value;

struct Server {
    base: String,
}

fn spawn(state: AppState) -> Server {
    let std_listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    std_listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", std_listener.local_addr().unwrap());
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
            mlfix_server::serve(listener, Arc::new(state), std::future::pending()).await.unwrap();
        });
    });
    Server { base }
}

struct Reply {
    status: u16,
    cache: Option<String>,
    body: Vec<u8>,
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

impl Server {
    fn post(&self, body: &[u8]) -> Reply {
        let mut resp = agent()
            .post(&format!("{}/analyze", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        Reply {
            status: resp.status().as_u16(),
            cache: resp.headers().get("x-cache").map(|v| v.to_str().unwrap().to_string()),
            body: resp.body_mut().with_config().limit(64 << 20).read_to_vec().unwrap(),
        }
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut resp = agent().get(&format!("{}{path}", self.base)).call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
    }
}

fn recorded_stub(bundle: &ArtifactBundle) -> StubProvider {
    let fixtures = Pipeline::with_seed_corpus().record_fixtures(bundle, echo_reply).unwrap();
    StubProvider::new(fixtures)
}

fn stub_state(bundle: &ArtifactBundle, cache_capacity: usize) -> AppState {
    AppState::new(
        Pipeline::with_seed_corpus(),
        Arc::new(recorded_stub(bundle)),
        cache_capacity,
        Duration::from_secs(120),
    )
}

fn metric(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(name)?.trim().parse().ok())
        .unwrap_or_else(|| panic!("{name} missing from {text}"))
}

#[test]
fn second_identical_request_is_a_byte_identical_cache_hit() {
    let bundle = common::partition_bundle();
    let server = spawn(stub_state(&bundle, 256));
    let (_, before) = server.get("/metrics");
    assert_eq!(metric(&before, "requests_total"), 0.0);
    assert_eq!(metric(&before, "mean_diagnosis_seconds"), 0.0);

    let body = encode_bundle(&bundle).unwrap();
    let first = server.post(&body);
    let second = server.post(&body);
    assert_eq!(first.status, 200);
    assert_eq!(first.cache.as_deref(), Some("miss"));
    assert_eq!(second.cache.as_deref(), Some("hit"));
    assert_eq!(first.body, second.body);

    let diagnosis: Diagnosis = serde_json::from_slice(&first.body).unwrap();
    assert!(!diagnosis.degraded);
    assert_eq!(diagnosis.ranked_findings[0].finding.finding_id, "reasoner:invalid-split");
    assert_eq!(diagnosis.consensus.samples, 5);

    let (status, text) = server.get("/metrics");
    assert_eq!(status, 200);
    let (hits, misses) = (metric(&text, "cache_hits"), metric(&text, "cache_misses"));
    assert_eq!((hits, misses), (1.0, 1.0));
    assert_eq!(hits / (hits + misses), 0.5);
    assert_eq!(metric(&text, "requests_total"), 2.0);
    assert!(metric(&text, "mean_diagnosis_seconds") > 0.0);
}

#[test]
fn malformed_and_invalid_bodies_are_rejected() {
    let bundle = common::clean_bundle();
    let server = spawn(stub_state(&bundle, 4));
    let body = encode_bundle(&bundle).unwrap();

    let truncated = server.post(&body[..body.len() / 2]);
    assert_eq!(truncated.status, 400);

    let mut doc: Value = serde_json::from_slice(&body).unwrap();
    doc["train_stats"]["sample_count"] = Value::String("many".into());
    let wrong_type = server.post(&serde_json::to_vec(&doc).unwrap());
    assert_eq!(wrong_type.status, 422);
    let err: Value = serde_json::from_slice(&wrong_type.body).unwrap();
    assert_eq!(err["field_path"], "train_stats.sample_count");

    let mut doc: Value = serde_json::from_slice(&body).unwrap();
    doc["modality"] = Value::String("image".into());
    let invariant = server.post(&serde_json::to_vec(&doc).unwrap());
    assert_eq!(invariant.status, 422);
    let err: Value = serde_json::from_slice(&invariant.body).unwrap();
    assert_eq!(err["field_path"], "modality");

    let (_, text) = server.get("/metrics");
    assert_eq!(metric(&text, "requests_total"), 3.0);
    assert_eq!(metric(&text, "cache_misses"), 0.0);
}

#[test]
fn provider_down_serves_a_degraded_rule_based_diagnosis() {
    let bundle = common::partition_bundle();
    let server = spawn(AppState::new(
        Pipeline::with_seed_corpus(),
        Arc::new(UnavailableProvider),
        256,
        Duration::from_secs(120),
    ));
    let body = encode_bundle(&bundle).unwrap();
    let first = server.post(&body);
    assert_eq!(first.status, 200);
    let d: Diagnosis = serde_json::from_slice(&first.body).unwrap();
    assert!(d.degraded);
    assert_eq!(d.consensus.samples, 0);
    assert_eq!(d.ranked_findings[0].finding.finding_id, "reasoner:invalid-split");
    assert!(d.actions[0].action.contains("recreate the train-test split"));
    // degraded answers are recomputed rather than served from cache
    let second = server.post(&body);
    assert_eq!(second.cache.as_deref(), Some("miss"));
    assert_eq!(first.body, second.body);
}

#[test]
fn health_reports_provider_and_corpus() {
    let bundle = common::clean_bundle();
    let server = spawn(stub_state(&bundle, 1));
    let (status, text) = server.get("/healthz");
    assert_eq!(status, 200);
    let h: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(h["status"], "ok");
    assert_eq!(h["provider_reachable"], true);
    assert_eq!(h["kb_documents"], 13);

    let kb = tempfile::tempdir().unwrap();
    for d in mlfix_core::kb::seed_corpus().into_iter().take(3) {
        std::fs::write(kb.path().join(format!("{}.json", d.doc_id)), serde_json::to_string(&d).unwrap()).unwrap();
    }
    let mut config = ServerConfig {
        kb_path: Some(kb.path().to_path_buf()),
        ..ServerConfig::default()
    };
    // nothing listens on the discard port
    config.provider.endpoint = Some("http://127.0.0.1:9/v1/chat/completions".into());
    let server = spawn(AppState::from_config(&config).unwrap());
    let started = Instant::now();
    let (status, text) = server.get("/healthz");
    assert_eq!(status, 200);
    assert!(started.elapsed() < Duration::from_secs(3));
    let h: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(h["provider_reachable"], false);
    assert_eq!(h["kb_documents"], 3);
}

struct SlowProvider;

impl LlmProvider for SlowProvider {
    fn id(&self) -> &str {
        "slow"
    }

    fn complete(&self, _request: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        std::thread::sleep(Duration::from_secs(3));
        Err(ProviderError::Malformed("too late".into()))
    }
}

#[test]
fn slow_analysis_times_out_with_504() {
    let bundle = common::partition_bundle();
    let server = spawn(AppState::new(
        Pipeline::with_seed_corpus(),
        Arc::new(SlowProvider),
        8,
        Duration::from_secs(1),
    ));
    let started = Instant::now();
    let reply = server.post(&encode_bundle(&bundle).unwrap());
    assert_eq!(reply.status, 504);
    assert!(started.elapsed() < Duration::from_secs(3));
}

#[test]
fn responses_depend_only_on_the_body_when_uncached() {
    let bundle = common::partition_bundle();
    let body = encode_bundle(&bundle).unwrap();
    let a = spawn(stub_state(&bundle, 0)).post(&body);
    let server = spawn(stub_state(&bundle, 0));
    let b = server.post(&body);
    let c = server.post(&body);
    assert_eq!(a.status, 200);
    assert_eq!(c.cache.as_deref(), Some("miss"));
    assert_eq!(a.body, b.body);
    assert_eq!(b.body, c.body);
}

#[test]
fn concurrent_identical_requests_agree() {
    let bundle = common::partition_bundle();
    let body = Arc::new(encode_bundle(&bundle).unwrap());
    let server = Arc::new(spawn(stub_state(&bundle, 16)));
    let bodies: Vec<Vec<u8>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..6)
            .map(|_| {
                let (server, body) = (server.clone(), body.clone());
                s.spawn(move || server.post(&body).body)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    let (_, text) = server.get("/metrics");
    assert_eq!(metric(&text, "cache_hits") + metric(&text, "cache_misses"), 6.0);
}

#[test]
fn stub_fixture_file_round_trips_through_config() {
    let bundle = common::partition_bundle();
    let fixtures: HashMap<String, StubReply> = recorded_stub(&bundle).fixtures().clone();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixtures.json");
    std::fs::write(&path, serde_json::to_string(&fixtures).unwrap()).unwrap();
    let mut config = ServerConfig::default();
    config.provider.fixtures = Some(path);
    let server = spawn(AppState::from_config(&config).unwrap());
    let reply = server.post(&encode_bundle(&bundle).unwrap());
    let d: Diagnosis = serde_json::from_slice(&reply.body).unwrap();
    assert!(!d.degraded);
    assert_eq!(d.consensus.agreement, 0.8);
}
