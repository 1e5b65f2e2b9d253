//! The full analysis: analyzers, aggregation, hypotheses, consensus, ranking.

use std::sync::Arc;

use serde_json::{json, Value};

use super::aggregate::{aggregate_findings, ClusterRule, FindingCluster};
use super::analyzers::{AgentRegistry, AnalyzerOutput};
use super::consensus::{self_consistent_complete, ConsensusFragment, ConsensusSample, DEFAULT_K, DEFAULT_TEMPERATURE};
use super::hypotheses::{generate_hypotheses, ClusterHypothesis};
use super::prompts::SYNTHESIS;
use super::provider::{CircuitBreaker, LlmProvider};
use super::rank::{rank_diagnosis, rank_findings};
use crate::artifact::codec::canonical_json;
use crate::artifact::{Diagnosis, Finding};
use crate::artifact::ArtifactBundle;
use crate::kb::{seed_corpus, KbIndex, WebSearch};

/// Root-cause categories offered to the synthesis step.
pub const ROOT_CAUSE_CATEGORIES: [&str; 8] = [
    "invalid-split",
    "imbalance-driven-underperformance",
    "leakage-inflated-evaluation",
    "configuration-error",
    "data-quality",
    "distribution-shift",
    "model-underperformance",
    "no-issue",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub consensus_k: usize,
    pub temperature: f64,
    pub base_seed: u64,
    pub max_repairs: u32,
    pub kb_top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            consensus_k: DEFAULT_K,
            temperature: DEFAULT_TEMPERATURE,
            base_seed: 0,
            max_repairs: super::MAX_REPAIRS,
            kb_top_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid pipeline config: {0}")]
pub struct PipelineConfigError(pub String);

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineConfigError> {
        if self.consensus_k == 0 || self.consensus_k.is_multiple_of(2) {
            return Err(PipelineConfigError(format!("consensus_k must be odd and ≥ 1, got {}", self.consensus_k)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(PipelineConfigError(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.kb_top_k == 0 {
            return Err(PipelineConfigError("kb_top_k must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Every intermediate product of one run, for inspection and tests.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub analyzer_outputs: Vec<(String, AnalyzerOutput)>,
    pub clusters: Vec<FindingCluster>,
    pub hypotheses: Vec<ClusterHypothesis>,
    pub samples: Vec<ConsensusSample>,
    pub consensus: Option<ConsensusFragment>,
    pub diagnosis: Diagnosis,
}

#[derive(Clone)]
pub struct Pipeline {
    pub registry: AgentRegistry,
    pub kb: Arc<KbIndex>,
    pub web: Option<Arc<dyn WebSearch>>,
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(kb: Arc<KbIndex>, config: PipelineConfig) -> Self {
        Self {
            registry: AgentRegistry::builtin(),
            kb,
            web: None,
            config,
        }
    }

    /// Built-in analyzers over the shipped corpus with default settings.
    pub fn with_seed_corpus() -> Self {
        let kb = KbIndex::build(seed_corpus()).expect("shipped corpus is valid");
        Self::new(Arc::new(kb), PipelineConfig::default())
    }

    pub fn run(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> Diagnosis {
        self.run_traced(bundle, provider).diagnosis
    }

    pub fn run_traced(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> PipelineTrace {
        let provider = CircuitBreaker::new(provider);
        let analyzer_outputs = self.registry.run_all(bundle, &provider);
        let findings: Vec<Finding> = analyzer_outputs
            .iter()
            .flat_map(|(_, o)| o.findings().cloned())
            .collect();
        let clusters = aggregate_findings(&findings);
        let hypotheses = generate_hypotheses(
            &clusters,
            &self.kb,
            self.web.as_deref(),
            &provider,
            self.config.kb_top_k,
        );
        let prompt = synthesis_prompt(&clusters, &hypotheses);
        let (samples, consensus) = self_consistent_complete(
            &provider,
            &prompt,
            self.config.consensus_k,
            self.config.temperature,
            self.config.base_seed,
            self.config.max_repairs,
        );
        let mut diagnosis = rank_diagnosis(&clusters, &hypotheses, consensus.as_ref());
        diagnosis.degraded = analyzer_outputs.iter().any(|(_, o)| o.degraded)
            || hypotheses.iter().any(|h| h.fallback)
            || consensus.is_none();
        if diagnosis.degraded {
            tracing::info!(tripped = provider.tripped(), "analysis degraded to rule-based output");
        }
        PipelineTrace {
            analyzer_outputs,
            clusters,
            hypotheses,
            samples,
            consensus,
            diagnosis,
        }
    }
}

fn synthesis_prompt(clusters: &[FindingCluster], hypotheses: &[ClusterHypothesis]) -> String {
    let ranked = rank_findings(clusters.iter().flat_map(|c| c.members.iter().cloned()));
    let findings: Vec<Value> = ranked
        .iter()
        .map(|r| {
            json!({
                "finding_id": r.finding.finding_id,
                "severity": r.finding.severity,
                "rank_score": r.rank_score,
                "description": r.finding.description,
            })
        })
        .collect();
    let hyps: Vec<Value> = hypotheses
        .iter()
        .map(|h| {
            let rule = clusters
                .iter()
                .find(|c| c.cluster_id == h.cluster_id)
                .map_or(ClusterRule::Singleton, |c| c.rule);
            json!({
                "cluster": h.cluster_id,
                "rule": rule.as_str(),
                "statement": h.hypothesis.statement,
                "plausibility": h.hypothesis.plausibility,
                "citations": h.hypothesis.kb_citations,
            })
        })
        .collect();
    SYNTHESIS.render(&[
        ("findings", &canonical_json(&Value::Array(findings))),
        ("hypotheses", &canonical_json(&Value::Array(hyps))),
        ("categories", &ROOT_CAUSE_CATEGORIES.join(", ")),
    ])
}
