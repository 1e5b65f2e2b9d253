mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use mlfix_core::agents::analyzers::{ChecksAnalyzer, CheckpointAnalyzer, DatasetAnalyzer};
use mlfix_core::agents::consensus::{aggregate_samples, DiagnosisFragment};
use mlfix_core::agents::{
    echo_reply, self_consistent_complete, Analyzer, AnalyzerOutput, AgentRegistry, LlmProvider, Pipeline,
    ProviderError, StubProvider, StubReply, UnavailableProvider,
};
use mlfix_core::artifact::{
    ArtifactBundle, CheckStatus, CheckpointMetadata, Diagnosis, LlmRequest, LlmResponse, Severity, SourceAgent,
    TokenUsage,
};

fn recorded(pipeline: &Pipeline, bundle: &ArtifactBundle) -> StubProvider {
    StubProvider::new(pipeline.record_fixtures(bundle, echo_reply).unwrap())
}

fn assert_closures(bundle: &ArtifactBundle, d: &Diagnosis) {
    let checks: BTreeSet<&str> = bundle.all_results().map(|r| r.check_id.as_str()).collect();
    for r in &d.ranked_findings {
        for e in &r.finding.evidence {
            assert!(checks.contains(e.check_id.as_str()), "dangling evidence {}", e.check_id);
        }
    }
    for w in d.ranked_findings.windows(2) {
        assert!(w[0].rank_score >= w[1].rank_score);
    }
    assert!(!d.actions.is_empty());
}

#[test]
fn partition_failure_is_diagnosed_first() {
    let bundle = common::partition_bundle();
    let pipeline = Pipeline::with_seed_corpus();
    let stub = recorded(&pipeline, &bundle);
    let trace = pipeline.run_traced(&bundle, &stub);
    let d = &trace.diagnosis;
    assert!(!d.degraded);
    let top = &d.ranked_findings[0].finding;
    assert_eq!(top.finding_id, "reasoner:invalid-split");
    assert_eq!(top.severity, Severity::Critical);
    assert!(top.description.starts_with("Critical data partitioning failure"));
    assert!(d.actions[0].action.contains("recreate the train-test split"));
    assert_eq!(d.hypotheses.len(), 1);
    assert_eq!(d.hypotheses[0].kb_citations, ["stratified-splitting"]);
    assert_eq!(d.consensus.samples, 5);
    assert!((d.consensus.agreement - 0.8).abs() < 1e-12);
    assert_eq!(d.consensus.root_cause_category.as_deref(), Some("invalid-split"));
    assert_closures(&bundle, d);
    for h in &trace.hypotheses {
        for c in &h.hypothesis.kb_citations {
            assert!(h.retrieved.contains(c));
        }
    }
    let again = pipeline.run(&bundle, &stub);
    assert_eq!(serde_json::to_string(d).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn provider_down_degrades_to_rules() {
    let bundle = common::partition_bundle();
    let pipeline = Pipeline::with_seed_corpus();
    let d = pipeline.run(&bundle, &UnavailableProvider);
    assert!(d.degraded);
    assert_eq!(d.consensus.samples, 0);
    assert_eq!(d.ranked_findings[0].finding.finding_id, "reasoner:invalid-split");
    assert!(d.actions[0].action.contains("recreate the train-test split"));
    assert_closures(&bundle, &d);
}

#[test]
fn clean_bundle_has_nothing_above_info() {
    let bundle = common::clean_bundle();
    let pipeline = Pipeline::with_seed_corpus();
    let d = pipeline.run(&bundle, &recorded(&pipeline, &bundle));
    assert!(d.ranked_findings.iter().all(|r| r.finding.severity == Severity::Info));
    assert_eq!(d.actions.len(), 1);
    assert_eq!(d.actions[0].action, "No significant issues detected");
    assert_eq!(d.summary, "No significant issues detected.");
}

/// Adds a scripted finding to the dataset analyzer's provider step.
fn scripted_extra(miss: &mlfix_core::agents::FixtureMissRecord) -> StubReply {
    let user = &miss.messages.last().unwrap().content;
    if miss.hint.as_deref() == Some("findings") && user.contains("review dataset statistics") {
        return StubReply::One(
            r#"Here you go: {"findings": [
                {"description": "Test split is dominated by unseen classes", "severity": "high", "confidence": 0.7,
                 "evidence": [{"check_id": "new_label", "metric": "new_label_ratio", "value": 0.75}], "columns": ["target"]},
                {"description": "Invented evidence", "severity": "critical",
                 "evidence": [{"check_id": "made_up_check", "metric": "m", "value": 1.0}]}
            ]}"#
            .into(),
        );
    }
    echo_reply(miss)
}

#[test]
fn provider_findings_are_additive_and_closed() {
    let bundle = common::partition_bundle();
    let pipeline = Pipeline::with_seed_corpus();
    let stub = StubProvider::new(pipeline.record_fixtures(&bundle, scripted_extra).unwrap());
    let d = pipeline.run(&bundle, &stub);
    let ids: BTreeSet<String> = d.ranked_findings.iter().map(|r| r.finding.finding_id.clone()).collect();
    let rules: Vec<String> = DatasetAnalyzer::rules(&bundle)
        .into_iter()
        .chain(ChecksAnalyzer::rules(&bundle))
        .chain(CheckpointAnalyzer::rules(&bundle))
        .map(|f| f.finding_id)
        .collect();
    for id in &rules {
        assert!(ids.contains(id), "rule finding {id} missing");
    }
    let extra: Vec<_> = d
        .ranked_findings
        .iter()
        .filter(|r| r.finding.finding_id.contains(":llm-"))
        .collect();
    assert_eq!(extra.len(), 1);
    assert_eq!(extra[0].finding.confidence, 0.7);
    assert_closures(&bundle, &d);
}

#[test]
fn imbalance_rule() {
    let train = common::table(&[("A", 980), ("B", 20)], 0, 5);
    let test = common::table(&[("A", 295), ("B", 5)], 10_000, 6);
    let bundle = common::bundle_for(&train, &test);
    let findings = DatasetAnalyzer::rules(&bundle);
    let f = findings.iter().find(|f| f.finding_id == "dataset:class-imbalance").unwrap();
    assert_eq!(f.severity, Severity::High);
    assert_eq!(f.evidence[0].check_id, "class_imbalance");
    assert!(DatasetAnalyzer::rules(&common::clean_bundle()).is_empty());
}

#[test]
fn check_failures_map_to_findings() {
    let mut bundle = common::clean_bundle();
    assert!(ChecksAnalyzer::rules(&bundle).is_empty());
    for id in ["data_duplicates", "feature_drift", "label_drift"] {
        let r = bundle
            .integrity_results
            .iter_mut()
            .chain(&mut bundle.validation_results)
            .find(|r| r.check_id == id)
            .unwrap();
        r.status = CheckStatus::Fail;
    }
    let findings = ChecksAnalyzer::rules(&bundle);
    let cited: BTreeSet<&str> = findings.iter().flat_map(|f| &f.evidence).map(|e| e.check_id.as_str()).collect();
    assert_eq!(findings.len(), 3);
    assert_eq!(cited.len(), 3);
}

#[test]
fn checkpoint_rules() {
    let mut bundle = common::partition_bundle();
    let absent = CheckpointAnalyzer::rules(&bundle);
    assert_eq!(absent.len(), 1);
    assert_eq!(absent[0].severity, Severity::Info);

    bundle.checkpoint = Some(CheckpointMetadata {
        architecture: "mlp".into(),
        parameter_count: 1200,
        num_classes: Some(2),
        docstring: Some("two-class scorer".into()),
        training_config: Default::default(),
    });
    assert!(CheckpointAnalyzer::rules(&bundle).is_empty());

    bundle.checkpoint.as_mut().unwrap().num_classes = Some(10);
    let f = CheckpointAnalyzer::rules(&bundle);
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].finding_id, "checkpoint:config-mismatch");
    assert_eq!(f[0].severity, Severity::Critical);
}

#[test]
fn consensus_on_scripted_samples() {
    let reply = |c: &str, conf: f64| format!(r#"{{"root_cause_category": "{c}", "actions": [], "confidence": {conf}}}"#);
    let prompt = "synthesize";
    let request = mlfix_core::agents::llm::structured_request(prompt.into(), "diagnosis", 0.7, Some(0));
    let hash = mlfix_core::agents::prompt_hash(&request.messages);
    let script = vec![reply("A", 0.8), reply("A", 0.9), reply("B", 0.3), reply("A", 0.7), reply("C", 0.2)];
    let stub = StubProvider::new(HashMap::from([(hash.clone(), StubReply::Many(script.clone()))]));
    let (samples, fragment) = self_consistent_complete(&stub, prompt, 5, 0.7, 0, 2);
    let fragment = fragment.unwrap();
    assert_eq!(samples.len(), 5);
    assert_eq!(fragment.root_cause_category, "a");
    assert!((fragment.agreement - 0.6).abs() < 1e-12);
    assert!((fragment.confidence - 0.48).abs() < 1e-12);

    let (_, single) = self_consistent_complete(&stub, prompt, 1, 0.7, 0, 2);
    let single = single.unwrap();
    assert_eq!((single.root_cause_category.as_str(), single.agreement), ("a", 1.0));
    assert!((single.confidence - 0.8).abs() < 1e-12);
}

#[test]
fn registry_rejects_duplicates_and_runs_extensions() {
    struct Quiet;
    impl Analyzer for Quiet {
        fn id(&self) -> &str {
            "quiet"
        }
        fn analyze(&self, _: &ArtifactBundle, _: &dyn LlmProvider) -> AnalyzerOutput {
            AnalyzerOutput::default()
        }
    }
    struct Shadow;
    impl Analyzer for Shadow {
        fn id(&self) -> &str {
            "dataset"
        }
        fn analyze(&self, _: &ArtifactBundle, _: &dyn LlmProvider) -> AnalyzerOutput {
            AnalyzerOutput::default()
        }
    }
    let mut reg = AgentRegistry::builtin();
    assert_eq!(reg.ids(), ["dataset", "checks", "checkpoint"]);
    assert!(reg.register(Arc::new(Shadow)).is_err());
    reg.register(Arc::new(Quiet)).unwrap();
    let out = reg.run_all(&common::clean_bundle(), &UnavailableProvider);
    let ids: Vec<&str> = out.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["dataset", "checks", "checkpoint", "quiet"]);
}

/// Answers every prompt with text that never parses.
struct Garbage;

impl LlmProvider for Garbage {
    fn id(&self) -> &str {
        "garbage"
    }
    fn complete(&self, _: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        Ok(LlmResponse {
            content: "I think the answer is { not json".into(),
            provider_id: "garbage".into(),
            usage: TokenUsage::default(),
        })
    }
}

mod properties {
    use super::*;
    use mlfix_core::agents::rank_findings;
    use mlfix_core::agents::ConsensusSample;
    use mlfix_core::artifact::{CheckCategory, Finding};
    use proptest::prelude::*;

    fn finding() -> impl Strategy<Value = (u8, u8, u8)> {
        (0u8..5, 0u8..=20, 0u8..3)
    }

    fn build(specs: &[(u8, u8, u8)]) -> Vec<Finding> {
        specs
            .iter()
            .enumerate()
            .map(|(i, (sev, conf, cat))| Finding {
                finding_id: format!("f{i:02}"),
                source_agent: SourceAgent::Checks,
                severity: Severity::ALL[*sev as usize],
                confidence: f64::from(*conf) / 20.0,
                category: CheckCategory::ALL[*cat as usize],
                evidence: vec![],
                columns: vec![],
                description: String::new(),
            })
            .collect()
    }

    fn position(ranked: &[mlfix_core::artifact::RankedFinding], id: &str) -> usize {
        ranked.iter().position(|r| r.finding.finding_id == id).unwrap()
    }

    proptest! {
        #[test]
        fn raising_severity_never_lowers_rank(specs in prop::collection::vec(finding(), 1..12), pick in any::<prop::sample::Index>()) {
            let findings = build(&specs);
            let i = pick.index(findings.len());
            let id = findings[i].finding_id.clone();
            let before = position(&rank_findings(findings.clone()), &id);
            let mut raised = findings;
            raised[i].severity = raised[i].severity.raised();
            let after = position(&rank_findings(raised), &id);
            prop_assert!(after <= before);
        }

        #[test]
        fn consensus_ignores_sample_order(
            votes in prop::collection::vec((0u8..3, 0u8..=10, prop::collection::vec(0u8..4, 0..3)), 1..8),
            seed in any::<u64>(),
        ) {
            let samples: Vec<ConsensusSample> = votes
                .iter()
                .map(|(c, conf, acts)| ConsensusSample {
                    raw: String::new(),
                    parsed: Ok(DiagnosisFragment {
                        root_cause_category: ["alpha", "beta", "gamma"][*c as usize].into(),
                        actions: acts.iter().map(|a| format!("Action {a}")).collect(),
                        confidence: f64::from(*conf) / 10.0,
                    }),
                })
                .collect();
            let mut shuffled = samples.clone();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(aggregate_samples(&samples), aggregate_samples(&shuffled));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn degraded_mode_is_total(a in 1usize..200, b in 0usize..200, x in 1usize..80, y in 0usize..80, garbage in any::<bool>()) {
            let train = common::table(&[("A", a), ("B", b)], 0, 11);
            let test = common::table(&[("A", x), ("C", y)], 10_000, 12);
            let bundle = common::bundle_for(&train, &test);
            let pipeline = Pipeline::with_seed_corpus();
            let d = if garbage { pipeline.run(&bundle, &Garbage) } else { pipeline.run(&bundle, &UnavailableProvider) };
            prop_assert!(d.degraded);
            prop_assert_eq!(d.consensus.samples, 0);
            assert_closures(&bundle, &d);
            if d.ranked_findings.iter().any(|r| r.finding.severity.at_least(Severity::High)) {
                prop_assert!(d.actions[0].action != "No significant issues detected");
            }
        }
    }
}
