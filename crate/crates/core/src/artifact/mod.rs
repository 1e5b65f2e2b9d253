//! Wire types exchanged between the ingesting client and the analysis server.
//!
//! Every type here has a canonical JSON encoding (see [`codec`]): object keys
//! are sorted, floats use the shortest representation that round-trips, and
//! non-finite numbers are rejected before anything is written.

pub mod codec;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use codec::{bundle_hash, decode, decode_bundle, encode, encode_bundle, CodecError};
pub use validate::{Validate, ValidationError};

/// Current bundle format version. Decoders accept any `1.x`.
pub const BUNDLE_VERSION: &str = "1.0";
pub const TABULAR_MODALITY: &str = "tabular";

/// Pseudo column reference used by findings that implicate the label.
pub const LABEL_REF: &str = "@label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
    Datetime,
    Identifier,
}

impl ColumnKind {
    /// Numeric and datetime columns are stored as floats.
    pub fn is_numeric_like(self) -> bool {
        matches!(self, ColumnKind::Numeric | ColumnKind::Datetime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Column declarations for a tabular dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSpec>,
    pub label_column: Option<String>,
    pub index_column: Option<String>,
    pub task: Task,
}

impl DatasetSchema {
    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Columns a model would consume: everything except the label, the index
    /// and identifier columns.
    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns.iter().enumerate().filter(move |(_, c)| self.is_feature(&c.name))
    }

    pub fn is_feature(&self, name: &str) -> bool {
        let Some(spec) = self.column(name) else {
            return false;
        };
        spec.kind != ColumnKind::Identifier
            && self.label_column.as_deref() != Some(name)
            && self.index_column.as_deref() != Some(name)
    }

    pub fn label(&self) -> Option<&ColumnSpec> {
        self.label_column.as_deref().and_then(|l| self.column(l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrequency {
    pub value: String,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStatistics {
    pub name: String,
    pub kind: ColumnKind,
    pub null_fraction: f64,
    pub distinct_count: u64,
    pub numeric_summary: Option<NumericSummary>,
    pub top_categories: Option<Vec<CategoryFrequency>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub sample_count: u64,
    pub per_column: Vec<ColumnStatistics>,
    pub class_distribution: Option<BTreeMap<String, u64>>,
}

impl DatasetStatistics {
    pub fn column(&self, name: &str) -> Option<&ColumnStatistics> {
        self.per_column.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckCategory {
    DataIntegrity,
    TrainTestValidation,
    ModelEvaluation,
}

impl CheckCategory {
    pub const ALL: [CheckCategory; 3] = [
        CheckCategory::DataIntegrity,
        CheckCategory::TrainTestValidation,
        CheckCategory::ModelEvaluation,
    ];

    /// Tie-break order used when ranking: validation, integrity, evaluation.
    pub fn rank_order(self) -> u8 {
        match self {
            CheckCategory::TrainTestValidation => 0,
            CheckCategory::DataIntegrity => 1,
            CheckCategory::ModelEvaluation => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckCategory::DataIntegrity => "data_integrity",
            CheckCategory::TrainTestValidation => "train_test_validation",
            CheckCategory::ModelEvaluation => "model_evaluation",
        }
    }
}

impl fmt::Display for CheckCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
    Error,
    Skipped,
}

/// Outcome of a single diagnostic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub category: CheckCategory,
    pub status: CheckStatus,
    pub metrics: BTreeMap<String, f64>,
    /// Threshold expression, e.g. `cramers_v ≤ 0.15`. Empty for report-only checks.
    pub condition: String,
    pub summary: String,
    pub details: BTreeMap<String, f64>,
    /// Columns the check implicates when it does not pass.
    #[serde(default)]
    pub flagged_columns: Vec<String>,
}

/// Scalar values allowed in a checkpoint's training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub architecture: String,
    pub parameter_count: u64,
    pub num_classes: Option<u32>,
    pub docstring: Option<String>,
    #[serde(default)]
    pub training_config: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRef {
    Train,
    Test,
}

/// A predicted label as it appears in a predictions sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelValue {
    Number(f64),
    Text(String),
}

impl LabelValue {
    /// String form comparable with categorical cells read from CSV.
    pub fn to_label_string(&self) -> String {
        match self {
            LabelValue::Number(x) => format!("{x}"),
            LabelValue::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            LabelValue::Number(x) => Some(*x),
            LabelValue::Text(s) => s.trim().parse().ok(),
        }
    }
}

/// Model outputs for one split. Never shipped inside a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub dataset_ref: DatasetRef,
    pub predicted_labels: Vec<LabelValue>,
    pub probabilities: Option<Vec<Vec<f64>>>,
    pub class_order: Option<Vec<String>>,
}

/// The "artifact data" posted to the analysis server: aggregates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactBundle {
    pub bundle_version: String,
    pub modality: String,
    pub created_at: DateTime<Utc>,
    pub train_stats: DatasetStatistics,
    pub test_stats: DatasetStatistics,
    pub integrity_results: Vec<CheckResult>,
    pub validation_results: Vec<CheckResult>,
    pub evaluation_results: Vec<CheckResult>,
    pub checkpoint: Option<CheckpointMetadata>,
    #[serde(default)]
    pub client_info: BTreeMap<String, String>,
}

impl ArtifactBundle {
    pub fn all_results(&self) -> impl Iterator<Item = &CheckResult> {
        self.integrity_results
            .iter()
            .chain(&self.validation_results)
            .chain(&self.evaluation_results)
    }

    pub fn result(&self, check_id: &str) -> Option<&CheckResult> {
        self.all_results().find(|r| r.check_id == check_id)
    }

    pub fn has_check(&self, check_id: &str) -> bool {
        self.result(check_id).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceAgent {
    Dataset,
    Checks,
    Checkpoint,
    Reasoner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
    Info,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Info,
    ];

    /// Ranking weight: critical 4 down to info 0.
    pub fn weight(self) -> f64 {
        match self {
            Severity::Critical => 4.0,
            Severity::High => 3.0,
            Severity::Medium => 2.0,
            Severity::Low => 1.0,
            Severity::Info => 0.0,
        }
    }

    /// One level more severe, saturating at critical.
    pub fn raised(self) -> Severity {
        match self {
            Severity::Info => Severity::Low,
            Severity::Low => Severity::Medium,
            Severity::Medium => Severity::High,
            Severity::High | Severity::Critical => Severity::Critical,
        }
    }

    pub fn at_least(self, other: Severity) -> bool {
        self.weight() >= other.weight()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "critical",
            Severity::High => "high",
            Severity::Medium => "medium",
            Severity::Low => "low",
            Severity::Info => "info",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        Severity::ALL
            .into_iter()
            .find(|sev| sev.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub check_id: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub finding_id: String,
    pub source_agent: SourceAgent,
    pub severity: Severity,
    pub confidence: f64,
    pub category: CheckCategory,
    pub evidence: Vec<Evidence>,
    /// Column (or [`LABEL_REF`]) references used for correlating findings.
    #[serde(default)]
    pub columns: Vec<String>,
    pub description: String,
}

impl Finding {
    pub fn cites(&self, check_id: &str) -> bool {
        self.evidence.iter().any(|e| e.check_id == check_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub statement: String,
    pub supporting_findings: Vec<String>,
    pub kb_citations: Vec<String>,
    pub plausibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFinding {
    pub finding: Finding,
    pub rank_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub action: String,
    pub rationale: String,
    pub linked_findings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSummary {
    /// Number of reasoning samples that parsed; 0 in degraded mode.
    pub samples: u32,
    pub agreement: f64,
    pub root_cause_category: Option<String>,
    pub confidence: f64,
}

impl ConsensusSummary {
    pub fn none() -> Self {
        Self {
            samples: 0,
            agreement: 0.0,
            root_cause_category: None,
            confidence: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub ranked_findings: Vec<RankedFinding>,
    pub hypotheses: Vec<Hypothesis>,
    pub actions: Vec<Action>,
    pub summary: String,
    pub consensus: ConsensusSummary,
    /// Set when any stage fell back to rule-based output.
    #[serde(default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub response_format_hint: Option<String>,
    /// Sampling seed; also selects among scripted replies in the stub provider.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub content: String,
    pub provider_id: String,
    pub usage: TokenUsage,
}
