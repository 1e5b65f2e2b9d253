use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mlfix_cli::synth;
use mlfix_cli::{read_csv, CliError};
use mlfix_core::agents::{echo_reply, Pipeline, StubProvider};
use mlfix_core::artifact::codec::encode;
use mlfix_core::artifact::{CheckStatus, ColumnKind, ColumnSpec, ConsensusSummary, DatasetSchema, Diagnosis, Task};
use mlfix_core::checks::fmt4;
use mlfix_server::AppState;

const EPOCH: &str = "1704067200";

fn mlfix(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlfix"))
        .args(args)
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", EPOCH)
        .env_remove("MLFIX_LLM_ENDPOINT")
        .env_remove("MLFIX_LLM_API_KEY")
        .env_remove("MLFIX_KB_PATH")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_schema() -> DatasetSchema {
    DatasetSchema {
        columns: vec![
            ColumnSpec::new("id", ColumnKind::Identifier),
            ColumnSpec::new("x", ColumnKind::Numeric),
            ColumnSpec::new("k", ColumnKind::Categorical),
            ColumnSpec::new("y", ColumnKind::Categorical),
        ],
        label_column: Some("y".into()),
        index_column: Some("id".into()),
        task: Task::Classification,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn csv_reader_rules() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (empty, report) = read_csv(&write(d, "h.csv", "id,x,k,y\n"), &small_schema()).unwrap();
    assert_eq!(empty.row_count, 0);
    assert_eq!(report.rows, 0);

    let (t, report) = read_csv(&write(d, "abc.csv", "id,x,k,y\n1,abc,a,p\n2,2.5,b,q\n"), &small_schema()).unwrap();
    assert_eq!(report.parse_failures, 1);
    assert!(t.column("x").unwrap().is_null(0));

    let a = read_csv(&write(d, "a.csv", "id,x,k,y\n1,1,a,p\n2,NA,b,q\n3,,c,p\n"), &small_schema()).unwrap();
    let b = read_csv(&write(d, "b.csv", "y,k,id,x\np,a,1,1\nq,b,2,NA\np,c,3,\n"), &small_schema()).unwrap();
    assert_eq!(a, b);

    let missing = read_csv(&write(d, "m.csv", "id,x,y\n1,2,p\n"), &small_schema()).unwrap_err();
    assert!(missing.to_string().contains("missing column \"k\""), "{missing}");
    let extra = read_csv(&write(d, "e.csv", "id,x,k,y,z\n1,2,a,p,0\n"), &small_schema()).unwrap_err();
    assert!(extra.to_string().contains("\"z\" is not in the schema"), "{extra}");
    let ragged = read_csv(&write(d, "r.csv", "id,x,k,y\n1,2,a,p\n2,3,b\n"), &small_schema()).unwrap_err();
    assert!(ragged.to_string().contains("r.csv:3: expected 4 fields, found 3"), "{ragged}");
    assert_eq!(ragged.exit_code(), 2);
    assert!(matches!(
        read_csv(&d.join("absent.csv"), &small_schema()),
        Err(CliError::Input(m)) if m.contains("absent.csv")
    ));
}

fn partition_bundle(dir: &Path) -> PathBuf {
    let paths = synth::write_partition(&dir.join("data"), 7, None).unwrap();
    let out = mlfix(
        &[
            "ingest",
            "--train",
            paths.train.to_str().unwrap(),
            "--test",
            paths.test.to_str().unwrap(),
            "--schema",
            paths.schema.to_str().unwrap(),
            "--out",
            "bundle.json",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("bundle.json")
}

#[test]
fn ingest_sections_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let bundle: serde_json::Value =
        serde_json::from_slice(&std::fs::read(partition_bundle(dir.path())).unwrap()).unwrap();
    for section in ["integrity_results", "validation_results", "evaluation_results"] {
        assert!(!bundle[section].as_array().unwrap().is_empty(), "{section}");
    }
    assert!(bundle["evaluation_results"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["status"] == "skipped"));
    assert_eq!(bundle["created_at"], "2024-01-01T00:00:00Z");

    let out = mlfix(
        &["ingest", "--train", "nope.csv", "--test", "data/test.csv", "--schema", "data/schema.json", "--out", "b2.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.csv"));
    assert!(!dir.path().join("b2.json").exists());
}

#[test]
fn predictions_populate_the_evaluation_suite() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let paths = synth::write_wide(&d.join("wide"), 400, 8, 3).unwrap();
    let labels = |p: &Path| -> Vec<String> {
        let mut r = csv::Reader::from_path(p).unwrap();
        let idx = r.headers().unwrap().iter().position(|h| h == "label").unwrap();
        r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
    };
    for (name, split, path) in [("ptrain.json", "train", &paths.train), ("ptest.json", "test", &paths.test)] {
        let doc = serde_json::json!({
            "dataset_ref": split,
            "predicted_labels": labels(path),
            "probabilities": null,
            "class_order": null,
        });
        write(d, name, &doc.to_string());
    }
    let args = [
        "ingest",
        "--train",
        paths.train.to_str().unwrap(),
        "--test",
        paths.test.to_str().unwrap(),
        "--schema",
        paths.schema.to_str().unwrap(),
        "--predictions-train",
        "ptrain.json",
        "--predictions-test",
        "ptest.json",
        "--out",
        "bundle.json",
    ];
    let out = mlfix(&args, d);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bundle = mlfix_cli::analyze::read_bundle(&d.join("bundle.json")).unwrap();
    assert!(bundle.evaluation_results.iter().any(|r| r.status != CheckStatus::Skipped));
}

#[test]
fn ingest_and_offline_analysis_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bundle = partition_bundle(d);
    let first = std::fs::read(&bundle).unwrap();
    partition_bundle(d);
    assert_eq!(first, std::fs::read(&bundle).unwrap());

    assert_eq!(code(&mlfix(&["record-fixtures", "--bundle", "bundle.json", "--out", "fx.json"], d)), 0);
    let run = |out: &str| {
        let o = mlfix(&["analyze", "--bundle", "bundle.json", "--offline", "--fixtures", "fx.json", "--out", out], d);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(d.join(out)).unwrap()
    };
    assert_eq!(run("d1.json"), run("d2.json"));
    let diag: Diagnosis = serde_json::from_slice(&run("d3.json")).unwrap();
    assert!(!diag.degraded);

    let no_provider = mlfix(&["analyze", "--bundle", "bundle.json", "--offline", "--out", "d4.json"], d);
    assert_eq!(code(&no_provider), 0);
    let degraded: Diagnosis = serde_json::from_slice(&std::fs::read(d.join("d4.json")).unwrap()).unwrap();
    assert!(degraded.degraded);
    assert_eq!(degraded.consensus.samples, 0);

    write(d, "broken.json", "{\"bundle_version\": ");
    let bad = mlfix(&["analyze", "--bundle", "broken.json", "--offline", "--out", "d5.json"], d);
    assert_eq!(code(&bad), 5);
}

fn spawn_server(state: AppState) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            mlfix_server::serve(listener, Arc::new(state), std::future::pending()).await.unwrap();
        });
    });
    base
}

#[test]
fn submit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bundle_path = partition_bundle(d);
    let bundle = mlfix_cli::analyze::read_bundle(&bundle_path).unwrap();
    let pipeline = Pipeline::with_seed_corpus();
    let stub = StubProvider::new(pipeline.record_fixtures(&bundle, echo_reply).unwrap());
    let base = spawn_server(AppState::new(pipeline, Arc::new(stub), 16, Duration::from_secs(60)));

    let ok = mlfix(&["analyze", "--bundle", "bundle.json", "--server", &base, "--out", "diag.json"], d);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let diag: Diagnosis = serde_json::from_slice(&std::fs::read(d.join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag.ranked_findings[0].finding.finding_id, "reasoner:invalid-split");

    let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&bundle_path).unwrap()).unwrap();
    doc["modality"] = "image".into();
    write(d, "invalid.json", &doc.to_string());
    let rejected = mlfix(&["analyze", "--bundle", "invalid.json", "--server", &base, "--out", "x.json"], d);
    assert_eq!(code(&rejected), 3);
    assert!(stderr(&rejected).contains("422"));
    assert!(stderr(&rejected).contains("modality"));

    // nothing listens on the discard port
    let refused = mlfix(
        &["analyze", "--bundle", "bundle.json", "--server", "http://127.0.0.1:9", "--timeout", "2", "--out", "x.json"],
        d,
    );
    assert_eq!(code(&refused), 4);

    // accepts connections but never answers
    let silent = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", silent.local_addr().unwrap());
    let started = Instant::now();
    let hung = mlfix(&["analyze", "--bundle", "bundle.json", "--server", &url, "--timeout", "1", "--out", "x.json"], d);
    assert_eq!(code(&hung), 4);
    assert!(started.elapsed() < Duration::from_secs(2), "{:?}", started.elapsed());
    assert!(!d.join("x.json").exists());
    drop(silent);
}

#[test]
fn report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    partition_bundle(d);
    assert_eq!(code(&mlfix(&["record-fixtures", "--bundle", "bundle.json", "--out", "fx.json"], d)), 0);
    let a = mlfix(&["analyze", "--bundle", "bundle.json", "--offline", "--fixtures", "fx.json", "--out", "diag.json"], d);
    assert_eq!(code(&a), 0);
    let diag: Diagnosis = serde_json::from_slice(&std::fs::read(d.join("diag.json")).unwrap()).unwrap();

    let md = mlfix(&["report", "--diagnosis", "diag.json"], d);
    assert_eq!(code(&md), 0);
    let md = String::from_utf8(md.stdout).unwrap();
    let top = &diag.ranked_findings[0].finding;
    for e in &top.evidence {
        assert!(md.contains(&fmt4(e.value)), "{} missing", fmt4(e.value));
    }
    let first_row = md.lines().find(|l| l.starts_with("| **")).unwrap();
    assert!(first_row.contains("Label drift: Cramer's V 0.92"), "{first_row}");
    assert!(first_row.contains("recreate the train-test split"), "{first_row}");
    assert!(first_row.contains("**Critical data partitioning failure"));

    let plain = String::from_utf8(mlfix(&["report", "--diagnosis", "diag.json", "--format", "plain"], d).stdout).unwrap();
    assert!(plain.contains("1. [CRITICAL] Critical data partitioning failure"));

    let empty = Diagnosis {
        ranked_findings: vec![],
        hypotheses: vec![],
        actions: vec![],
        summary: "No significant issues detected.".into(),
        consensus: ConsensusSummary::none(),
        degraded: false,
    };
    std::fs::write(d.join("empty.json"), encode(&empty).unwrap()).unwrap();
    for format in ["markdown", "plain"] {
        let out = mlfix(&["report", "--diagnosis", "empty.json", "--format", format], d);
        assert!(String::from_utf8(out.stdout).unwrap().contains("No significant issues detected"));
    }

    write(d, "bad.json", "[1, 2");
    assert_eq!(code(&mlfix(&["report", "--diagnosis", "bad.json"], d)), 5);
    write(d, "wrong.json", "{\"ranked_findings\": 3}");
    assert_eq!(code(&mlfix(&["report", "--diagnosis", "wrong.json"], d)), 5);
}
