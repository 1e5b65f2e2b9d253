//! The parallel analyzers: dataset statistics, check results, checkpoint.
//!
//! Each analyzer runs a deterministic rule pass, then asks the provider for
//! additional findings. Provider output can only add findings; evidence that
//! does not resolve to a check in the bundle is dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use super::llm::{complete_json, structured_request};
use super::prompts::{Template, CHECKPOINT, CHECKS, DATASET};
use super::provider::LlmProvider;
use crate::artifact::codec::canonical_json;
use crate::artifact::{
    ArtifactBundle, CheckCategory, CheckResult, CheckStatus, DatasetStatistics, Evidence, Finding, Severity,
    SourceAgent, LABEL_REF,
};
use crate::checks::registry;
use crate::checks::{fmt4, Condition};

pub const RULE_CONFIDENCE: f64 = 0.95;
pub const PROVIDER_CONFIDENCE: f64 = 0.6;
pub const IMBALANCE_RATIO_LIMIT: f64 = 0.1;
pub const NULL_FRACTION_LIMIT: f64 = 0.3;
pub const CLASS_SHIFT_LIMIT: f64 = 0.2;
/// A failing validation check is critical when it misses its threshold by
/// more than this factor.
pub const CRITICAL_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyzerOutput {
    pub rule_findings: Vec<Finding>,
    pub extra_findings: Vec<Finding>,
    /// The provider step failed and only rule findings are present.
    pub degraded: bool,
}

impl AnalyzerOutput {
    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.rule_findings.iter().chain(&self.extra_findings)
    }
}

/// An analysis agent. Implementations must be deterministic given the
/// bundle and the provider's replies.
pub trait Analyzer: Send + Sync {
    fn id(&self) -> &str;
    fn analyze(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> AnalyzerOutput;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("an analyzer with id {0:?} is already registered")]
pub struct DuplicateAnalyzer(pub String);

/// Ordered set of analyzers run for every bundle.
#[derive(Clone)]
pub struct AgentRegistry {
    analyzers: Vec<Arc<dyn Analyzer>>,
}

impl Default for AgentRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl AgentRegistry {
    pub fn builtin() -> Self {
        Self {
            analyzers: vec![Arc::new(DatasetAnalyzer), Arc::new(ChecksAnalyzer), Arc::new(CheckpointAnalyzer)],
        }
    }

    pub fn register(&mut self, analyzer: Arc<dyn Analyzer>) -> Result<(), DuplicateAnalyzer> {
        if self.analyzers.iter().any(|a| a.id() == analyzer.id()) {
            return Err(DuplicateAnalyzer(analyzer.id().to_string()));
        }
        self.analyzers.push(analyzer);
        Ok(())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.analyzers.iter().map(|a| a.id()).collect()
    }

    /// Runs all analyzers concurrently; results come back in registry order.
    pub fn run_all(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> Vec<(String, AnalyzerOutput)> {
        std::thread::scope(|s| {
            let handles: Vec<_> = self
                .analyzers
                .iter()
                .map(|a| (a.id().to_string(), s.spawn(move || a.analyze(bundle, provider))))
                .collect();
            handles
                .into_iter()
                .map(|(id, h)| {
                    let out = h.join().unwrap_or_else(|_| {
                        tracing::warn!(analyzer = %id, "analyzer panicked");
                        AnalyzerOutput {
                            degraded: true,
                            ..AnalyzerOutput::default()
                        }
                    });
                    (id, out)
                })
                .collect()
        })
    }
}

fn evidence(bundle: &ArtifactBundle, check_id: &str, metric: &str) -> Option<Evidence> {
    let value = *bundle.result(check_id)?.metrics.get(metric)?;
    Some(Evidence {
        check_id: check_id.to_string(),
        metric: metric.to_string(),
        value,
    })
}

fn detail_evidence(bundle: &ArtifactBundle, check_id: &str, key: &str) -> Option<Evidence> {
    let value = *bundle.result(check_id)?.details.get(key)?;
    Some(Evidence {
        check_id: check_id.to_string(),
        metric: key.to_string(),
        value,
    })
}

fn compact(value: &Value) -> String {
    canonical_json(value)
}

fn check_ids(bundle: &ArtifactBundle) -> String {
    bundle
        .all_results()
        .map(|r| r.check_id.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Deserialize)]
struct ProposedFindings {
    #[serde(default)]
    findings: Vec<ProposedFinding>,
}

#[derive(Debug, Deserialize)]
struct ProposedFinding {
    description: String,
    severity: String,
    #[serde(default)]
    confidence: Option<f64>,
    #[serde(default)]
    evidence: Vec<Evidence>,
    #[serde(default)]
    columns: Vec<String>,
}

/// Turns provider proposals into findings, keeping only evidence that
/// resolves to a check present in the bundle.
fn accept_proposals(
    bundle: &ArtifactBundle,
    agent: SourceAgent,
    prefix: &str,
    default_category: CheckCategory,
    proposals: Vec<ProposedFinding>,
) -> Vec<Finding> {
    let known_columns: BTreeSet<&str> = bundle
        .train_stats
        .per_column
        .iter()
        .map(|c| c.name.as_str())
        .chain([LABEL_REF])
        .collect();
    let mut out = Vec::new();
    for p in proposals {
        let evidence: Vec<Evidence> = p
            .evidence
            .into_iter()
            .filter(|e| bundle.has_check(&e.check_id) && e.value.is_finite())
            .collect();
        if evidence.is_empty() || p.description.trim().is_empty() {
            continue;
        }
        let category = registry::find(&evidence[0].check_id).map_or(default_category, |s| s.category);
        let confidence = p
            .confidence
            .filter(|c| c.is_finite())
            .map_or(PROVIDER_CONFIDENCE, |c| c.clamp(0.0, 1.0));
        out.push(Finding {
            finding_id: format!("{prefix}:llm-{}", out.len() + 1),
            source_agent: agent,
            severity: Severity::parse(&p.severity).unwrap_or(Severity::Medium),
            confidence,
            category,
            evidence,
            columns: p.columns.into_iter().filter(|c| known_columns.contains(c.as_str())).collect(),
            description: p.description.trim().to_string(),
        });
    }
    out
}

/// Shared provider step: render the prompt, parse proposals, accept them.
fn provider_pass(
    bundle: &ArtifactBundle,
    provider: &dyn LlmProvider,
    template: Template,
    vars: &[(&str, &str)],
    agent: SourceAgent,
    prefix: &str,
    default_category: CheckCategory,
) -> Result<Vec<Finding>, ()> {
    let request = structured_request(template.render(vars), "findings", 0.0, None);
    match complete_json::<ProposedFindings>(provider, request, super::MAX_REPAIRS) {
        Ok((p, _)) => Ok(accept_proposals(bundle, agent, prefix, default_category, p.findings)),
        Err(e) => {
            tracing::debug!(analyzer = prefix, error = %e, "provider step failed");
            Err(())
        }
    }
}

fn rule_findings_json(findings: &[Finding]) -> String {
    compact(&serde_json::to_value(findings).unwrap_or(Value::Null))
}

fn rule_finding(
    id: String,
    agent: SourceAgent,
    severity: Severity,
    category: CheckCategory,
    evidence: Vec<Evidence>,
    columns: Vec<String>,
    description: String,
) -> Finding {
    Finding {
        finding_id: id,
        source_agent: agent,
        severity,
        confidence: RULE_CONFIDENCE,
        category,
        evidence,
        columns,
        description,
    }
}

/// Rarest / most frequent class count.
pub fn imbalance_ratio(stats: &DatasetStatistics) -> Option<f64> {
    let dist = stats.class_distribution.as_ref()?;
    if dist.len() < 2 {
        return None;
    }
    let min = *dist.values().min()? as f64;
    let max = *dist.values().max()? as f64;
    (max > 0.0).then(|| min / max)
}

/// Total variation distance between two class distributions.
pub fn class_shift(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> Option<f64> {
    let (na, nb) = (a.values().sum::<u64>() as f64, b.values().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let tv = keys
        .into_iter()
        .map(|k| {
            let p = a.get(k).copied().unwrap_or(0) as f64 / na;
            let q = b.get(k).copied().unwrap_or(0) as f64 / nb;
            (p - q).abs()
        })
        .sum::<f64>()
        / 2.0;
    Some(tv)
}

pub struct DatasetAnalyzer;

impl DatasetAnalyzer {
    pub fn rules(bundle: &ArtifactBundle) -> Vec<Finding> {
        let mut out = Vec::new();
        let train = &bundle.train_stats;
        if let Some(ratio) = imbalance_ratio(train).filter(|r| *r < IMBALANCE_RATIO_LIMIT) {
            let ev = evidence(bundle, "class_imbalance", "imbalance_ratio").into_iter().collect();
            out.push(rule_finding(
                "dataset:class-imbalance".into(),
                SourceAgent::Dataset,
                Severity::High,
                CheckCategory::DataIntegrity,
                ev,
                vec![LABEL_REF.into()],
                format!(
                    "Severe class imbalance in train: the rarest class has {} of the most frequent class's samples",
                    fmt4(ratio)
                ),
            ));
        }
        let mut null_columns: BTreeMap<&str, f64> = BTreeMap::new();
        for stats in [&bundle.train_stats, &bundle.test_stats] {
            for c in &stats.per_column {
                if c.null_fraction > NULL_FRACTION_LIMIT {
                    let e = null_columns.entry(c.name.as_str()).or_insert(0.0);
                    *e = e.max(c.null_fraction);
                }
            }
        }
        for (col, frac) in null_columns {
            let ev = detail_evidence(bundle, "percent_of_nulls", col)
                .or_else(|| evidence(bundle, "percent_of_nulls", "max_null_fraction"))
                .into_iter()
                .collect();
            out.push(rule_finding(
                format!("dataset:nulls:{col}"),
                SourceAgent::Dataset,
                Severity::Medium,
                CheckCategory::DataIntegrity,
                ev,
                vec![col.to_string()],
                format!("Column {col} is {}% null", fmt4(frac * 100.0)),
            ));
        }
        if let (Some(a), Some(b)) = (&train.class_distribution, &bundle.test_stats.class_distribution) {
            if let Some(tv) = class_shift(a, b).filter(|tv| *tv > CLASS_SHIFT_LIMIT) {
                let ev = evidence(bundle, "label_drift", "cramers_v").into_iter().collect();
                out.push(rule_finding(
                    "dataset:class-distribution-shift".into(),
                    SourceAgent::Dataset,
                    Severity::High,
                    CheckCategory::TrainTestValidation,
                    ev,
                    vec![LABEL_REF.into()],
                    format!(
                        "Class distributions differ between train and test (total variation distance {})",
                        fmt4(tv)
                    ),
                ));
            }
        }
        out
    }
}

impl Analyzer for DatasetAnalyzer {
    fn id(&self) -> &str {
        "dataset"
    }

    fn analyze(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> AnalyzerOutput {
        let rule_findings = Self::rules(bundle);
        let train = compact(&serde_json::to_value(&bundle.train_stats).unwrap_or(Value::Null));
        let test = compact(&serde_json::to_value(&bundle.test_stats).unwrap_or(Value::Null));
        let rules = rule_findings_json(&rule_findings);
        let ids = check_ids(bundle);
        let extra = provider_pass(
            bundle,
            provider,
            DATASET,
            &[("train_stats", &train), ("test_stats", &test), ("rule_findings", &rules), ("check_ids", &ids)],
            SourceAgent::Dataset,
            "dataset",
            CheckCategory::DataIntegrity,
        );
        AnalyzerOutput {
            rule_findings,
            degraded: extra.is_err(),
            extra_findings: extra.unwrap_or_default(),
        }
    }
}

/// Severity of a check result; `None` for results that raise nothing.
pub fn check_severity(result: &CheckResult) -> Option<Severity> {
    match result.status {
        CheckStatus::Pass | CheckStatus::Skipped => None,
        CheckStatus::Warn => Some(Severity::Low),
        CheckStatus::Error => Some(Severity::Info),
        CheckStatus::Fail => Some(match result.category {
            CheckCategory::TrainTestValidation => {
                let far = Condition::parse(&result.condition).is_some_and(|c| {
                    result
                        .metrics
                        .get(&c.metric)
                        .is_some_and(|v| c.violated_by_factor(*v, CRITICAL_FACTOR))
                });
                if far {
                    Severity::Critical
                } else {
                    Severity::High
                }
            }
            CheckCategory::DataIntegrity => match result.check_id.as_str() {
                "conflicting_labels" | "feature_label_correlation" => Severity::High,
                _ => Severity::Medium,
            },
            CheckCategory::ModelEvaluation => Severity::Medium,
        }),
    }
}

pub struct ChecksAnalyzer;

impl ChecksAnalyzer {
    pub fn rules(bundle: &ArtifactBundle) -> Vec<Finding> {
        let mut out = Vec::new();
        for r in bundle.all_results() {
            let Some(severity) = check_severity(r) else { continue };
            let title = registry::title(&r.check_id);
            let primary = Condition::parse(&r.condition).and_then(|c| r.metrics.get(&c.metric).map(|v| (c.metric, *v)));
            let evidence: Vec<Evidence> = match &primary {
                Some((metric, value)) => vec![Evidence {
                    check_id: r.check_id.clone(),
                    metric: metric.clone(),
                    value: *value,
                }],
                None => r
                    .metrics
                    .iter()
                    .map(|(m, v)| Evidence {
                        check_id: r.check_id.clone(),
                        metric: m.clone(),
                        value: *v,
                    })
                    .collect(),
            };
            let description = match (r.status, &primary) {
                (CheckStatus::Error, _) => format!("{title} could not run: {}", r.summary),
                (status, Some((metric, value))) => {
                    let verb = if status == CheckStatus::Fail { "failed" } else { "warned" };
                    format!(
                        "{title} check {verb}: {metric} = {} against condition {}. {}",
                        fmt4(*value),
                        r.condition,
                        r.summary
                    )
                }
                (_, None) => format!("{title}: {}", r.summary),
            };
            out.push(rule_finding(
                format!("checks:{}", r.check_id),
                SourceAgent::Checks,
                severity,
                r.category,
                evidence,
                r.flagged_columns.clone(),
                description,
            ));
        }
        out
    }
}

impl Analyzer for ChecksAnalyzer {
    fn id(&self) -> &str {
        "checks"
    }

    fn analyze(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> AnalyzerOutput {
        let rule_findings = Self::rules(bundle);
        let interesting: Vec<&CheckResult> = bundle
            .all_results()
            .filter(|r| matches!(r.status, CheckStatus::Fail | CheckStatus::Warn))
            .collect();
        if interesting.is_empty() {
            return AnalyzerOutput {
                rule_findings,
                ..AnalyzerOutput::default()
            };
        }
        let results = compact(&serde_json::to_value(&interesting).unwrap_or(Value::Null));
        let rules = rule_findings_json(&rule_findings);
        let ids = check_ids(bundle);
        let extra = provider_pass(
            bundle,
            provider,
            CHECKS,
            &[("results", &results), ("rule_findings", &rules), ("check_ids", &ids)],
            SourceAgent::Checks,
            "checks",
            CheckCategory::ModelEvaluation,
        );
        AnalyzerOutput {
            rule_findings,
            degraded: extra.is_err(),
            extra_findings: extra.unwrap_or_default(),
        }
    }
}

pub const CONFIG_MISMATCH_ID: &str = "checkpoint:config-mismatch";

pub struct CheckpointAnalyzer;

impl CheckpointAnalyzer {
    pub fn rules(bundle: &ArtifactBundle) -> Vec<Finding> {
        let cat = CheckCategory::ModelEvaluation;
        let Some(meta) = &bundle.checkpoint else {
            return vec![rule_finding(
                "checkpoint:absent".into(),
                SourceAgent::Checkpoint,
                Severity::Info,
                cat,
                vec![],
                vec![],
                "No checkpoint provided; model configuration was not validated".into(),
            )];
        };
        let mut out = Vec::new();
        if meta.parameter_count == 0 {
            out.push(rule_finding(
                "checkpoint:zero-parameters".into(),
                SourceAgent::Checkpoint,
                Severity::Critical,
                cat,
                vec![],
                vec![],
                format!("Checkpoint {} reports zero parameters", meta.architecture),
            ));
        }
        let observed = bundle.train_stats.class_distribution.as_ref().map(BTreeMap::len);
        if let (Some(declared), Some(observed)) = (meta.num_classes, observed) {
            if declared as usize != observed {
                let ev = evidence(bundle, "class_imbalance", "class_count").into_iter().collect();
                out.push(rule_finding(
                    CONFIG_MISMATCH_ID.into(),
                    SourceAgent::Checkpoint,
                    Severity::Critical,
                    cat,
                    ev,
                    vec![LABEL_REF.into()],
                    format!(
                        "Checkpoint expects {declared} classes but the training labels have {observed}"
                    ),
                ));
            }
        }
        if meta.docstring.as_deref().is_none_or(|d| d.trim().is_empty()) {
            out.push(rule_finding(
                "checkpoint:no-docstring".into(),
                SourceAgent::Checkpoint,
                Severity::Info,
                cat,
                vec![],
                vec![],
                "Checkpoint has no docstring describing the model".into(),
            ));
        }
        out
    }
}

impl Analyzer for CheckpointAnalyzer {
    fn id(&self) -> &str {
        "checkpoint"
    }

    fn analyze(&self, bundle: &ArtifactBundle, provider: &dyn LlmProvider) -> AnalyzerOutput {
        let rule_findings = Self::rules(bundle);
        let Some(meta) = &bundle.checkpoint else {
            return AnalyzerOutput {
                rule_findings,
                ..AnalyzerOutput::default()
            };
        };
        let checkpoint = compact(&serde_json::to_value(meta).unwrap_or(Value::Null));
        let classes = bundle
            .train_stats
            .class_distribution
            .as_ref()
            .map_or_else(|| "unknown".to_string(), |d| d.len().to_string());
        let rules = rule_findings_json(&rule_findings);
        let ids = check_ids(bundle);
        let extra = provider_pass(
            bundle,
            provider,
            CHECKPOINT,
            &[
                ("checkpoint", &checkpoint),
                ("train_classes", &classes),
                ("rule_findings", &rules),
                ("check_ids", &ids),
            ],
            SourceAgent::Checkpoint,
            "checkpoint",
            CheckCategory::ModelEvaluation,
        );
        AnalyzerOutput {
            rule_findings,
            degraded: extra.is_err(),
            extra_findings: extra.unwrap_or_default(),
        }
    }
}
