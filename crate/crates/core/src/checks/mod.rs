//! Phase-one diagnostic checks over tabular splits and predictions.

pub mod config;
pub mod describe;
pub mod drift_tree;
pub mod registry;
pub mod stats;

mod evaluation;
mod integrity;
mod validation;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;

use crate::artifact::{CheckCategory, CheckResult, CheckStatus, DatasetRef, PredictionSet, Validate};
use crate::table::{Column, ColumnData, TableFrame};

pub use config::{CheckConfig, Comparison, Condition, ConfigError};
pub use describe::compute_dataset_statistics;
pub use registry::{CheckSpec, REGISTRY};
pub use stats::StatError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("unknown check {0:?}")]
    UnknownCheck(String),
    #[error("invalid check context: {0}")]
    Context(String),
}

/// Everything a check may look at.
#[derive(Debug, Clone, Copy)]
pub struct CheckContext<'a> {
    pub train: &'a TableFrame,
    pub test: Option<&'a TableFrame>,
    pub train_predictions: Option<&'a PredictionSet>,
    pub test_predictions: Option<&'a PredictionSet>,
    pub config: &'a CheckConfig,
}

impl<'a> CheckContext<'a> {
    pub fn new(train: &'a TableFrame, config: &'a CheckConfig) -> Self {
        Self {
            train,
            test: None,
            train_predictions: None,
            test_predictions: None,
            config,
        }
    }

    pub fn with_test(mut self, test: &'a TableFrame) -> Self {
        self.test = Some(test);
        self
    }

    pub fn with_predictions(mut self, predictions: &'a PredictionSet) -> Self {
        match predictions.dataset_ref {
            DatasetRef::Train => self.train_predictions = Some(predictions),
            DatasetRef::Test => self.test_predictions = Some(predictions),
        }
        self
    }

    pub fn validate(&self) -> Result<(), CheckError> {
        self.config.validate().map_err(|e| CheckError::Context(e.to_string()))?;
        if let Some(test) = self.test {
            if test.schema != self.train.schema {
                return Err(CheckError::Context("test schema differs from train schema".into()));
            }
        }
        for (which, preds) in [(DatasetRef::Train, self.train_predictions), (DatasetRef::Test, self.test_predictions)] {
            let Some(p) = preds else { continue };
            if p.dataset_ref != which {
                return Err(CheckError::Context(format!("predictions slot {which:?} holds {:?}", p.dataset_ref)));
            }
            let Some(table) = self.table(which) else {
                return Err(CheckError::Context(format!("predictions for missing {which:?} split")));
            };
            if p.predicted_labels.len() != table.row_count {
                return Err(CheckError::Context(format!(
                    "{which:?} predictions have {} rows, dataset has {}",
                    p.predicted_labels.len(),
                    table.row_count
                )));
            }
            p.validate().map_err(|e| CheckError::Context(e.to_string()))?;
        }
        Ok(())
    }

    pub fn table(&self, which: DatasetRef) -> Option<&'a TableFrame> {
        match which {
            DatasetRef::Train => Some(self.train),
            DatasetRef::Test => self.test,
        }
    }

    pub fn predictions(&self, which: DatasetRef) -> Option<&'a PredictionSet> {
        match which {
            DatasetRef::Train => self.train_predictions,
            DatasetRef::Test => self.test_predictions,
        }
    }
}

/// Why a check did not produce a measurement.
#[derive(Debug)]
pub(crate) struct Skip(pub String);

impl From<StatError> for Skip {
    fn from(e: StatError) -> Self {
        Skip(e.to_string())
    }
}

pub(crate) fn skip<T>(reason: impl Into<String>) -> Result<T, Skip> {
    Err(Skip(reason.into()))
}

/// What a check measured, before its status is decided.
#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    /// `None` for report-only checks, which always pass.
    pub condition: Option<Condition>,
    pub summary: String,
    pub details: BTreeMap<String, f64>,
    pub flagged_columns: Vec<String>,
    /// Status used when the condition is violated (`Fail` unless set).
    pub violation_status: Option<CheckStatus>,
    /// Status used when the condition holds (`Pass` unless set).
    pub pass_status: Option<CheckStatus>,
}

impl Outcome {
    pub fn new(summary: impl Into<String>) -> Self {
        Self {
            summary: summary.into(),
            ..Self::default()
        }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn condition(mut self, metric: &str, comparison: Comparison) -> Self {
        self.condition = Some(Condition::new(metric, comparison));
        self
    }

    pub fn details(mut self, details: impl IntoIterator<Item = (String, f64)>) -> Self {
        self.details.extend(details);
        self
    }

    pub fn flag(mut self, columns: impl IntoIterator<Item = String>) -> Self {
        self.flagged_columns.extend(columns);
        self
    }

    fn status(&self) -> CheckStatus {
        let Some(cond) = &self.condition else {
            return CheckStatus::Pass;
        };
        let value = self.metrics.get(&cond.metric).copied().unwrap_or(f64::NAN);
        if cond.holds(value) {
            self.pass_status.unwrap_or(CheckStatus::Pass)
        } else {
            self.violation_status.unwrap_or(CheckStatus::Fail)
        }
    }
}

type CheckFn = fn(&CheckContext<'_>) -> Result<Outcome, Skip>;

fn implementation(id: &str) -> Option<CheckFn> {
    Some(match id {
        "percent_of_nulls" => integrity::percent_of_nulls,
        "mixed_nulls" => integrity::mixed_nulls,
        "mixed_data_types" => integrity::mixed_data_types,
        "string_mismatch" => integrity::string_mismatch,
        "special_characters" => integrity::special_characters,
        "is_single_value" => integrity::is_single_value,
        "class_imbalance" => integrity::class_imbalance,
        "data_duplicates" => integrity::data_duplicates,
        "conflicting_labels" => integrity::conflicting_labels,
        "outlier_sample_detection" => integrity::outlier_sample_detection,
        "feature_label_correlation" => integrity::feature_label_correlation,
        "feature_feature_correlation" => integrity::feature_feature_correlation,
        "datasets_size_comparison" => validation::datasets_size_comparison,
        "new_label" => validation::new_label,
        "new_category" => validation::new_category,
        "index_leakage" => validation::index_leakage,
        "train_test_samples_mix" => validation::train_test_samples_mix,
        "label_drift" => validation::label_drift,
        "feature_drift" => validation::feature_drift,
        "multivariate_drift" => validation::multivariate_drift,
        "single_dataset_performance" => evaluation::single_dataset_performance,
        "train_test_performance" => evaluation::train_test_performance,
        "confusion_matrix_report" => evaluation::confusion_matrix_report,
        "roc_report" => evaluation::roc_report,
        "calibration_score" => evaluation::calibration_score,
        "simple_model_comparison" => evaluation::simple_model_comparison,
        "weak_segments_performance" => evaluation::weak_segments_performance,
        "prediction_drift" => evaluation::prediction_drift,
        _ => return None,
    })
}

fn bare_result(spec: &CheckSpec, status: CheckStatus, summary: String) -> CheckResult {
    CheckResult {
        check_id: spec.id.to_string(),
        category: spec.category,
        status,
        metrics: BTreeMap::new(),
        condition: String::new(),
        summary,
        details: BTreeMap::new(),
        flagged_columns: Vec::new(),
    }
}

fn execute(spec: &CheckSpec, f: CheckFn, ctx: &CheckContext<'_>) -> CheckResult {
    match catch_unwind(AssertUnwindSafe(|| f(ctx))) {
        Ok(Ok(outcome)) => {
            let status = outcome.status();
            if outcome.metrics.values().chain(outcome.details.values()).any(|v| !v.is_finite()) {
                return bare_result(spec, CheckStatus::Error, "check produced a non-finite value".into());
            }
            let mut flagged = outcome.flagged_columns;
            if status == CheckStatus::Pass {
                flagged.clear();
            }
            CheckResult {
                check_id: spec.id.to_string(),
                category: spec.category,
                status,
                metrics: outcome.metrics,
                condition: outcome.condition.map(|c| c.to_string()).unwrap_or_default(),
                summary: outcome.summary,
                details: outcome.details,
                flagged_columns: flagged,
            }
        }
        Ok(Err(Skip(reason))) => bare_result(spec, CheckStatus::Skipped, reason),
        Err(panic) => {
            let reason = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            tracing::warn!(check = spec.id, "check failed internally");
            bare_result(spec, CheckStatus::Error, format!("internal error: {reason}"))
        }
    }
}

pub fn run_check(check_id: &str, ctx: &CheckContext<'_>) -> Result<CheckResult, CheckError> {
    let spec = registry::find(check_id).ok_or_else(|| CheckError::UnknownCheck(check_id.to_string()))?;
    let f = implementation(check_id).ok_or_else(|| CheckError::UnknownCheck(check_id.to_string()))?;
    ctx.validate()?;
    Ok(execute(spec, f, ctx))
}

/// Runs every check of `category` in registry order. An invalid context
/// yields one `error` result per check.
pub fn run_suite(category: CheckCategory, ctx: &CheckContext<'_>) -> Vec<CheckResult> {
    let specs: Vec<&CheckSpec> = registry::in_category(category).collect();
    if let Err(e) = ctx.validate() {
        return specs
            .into_iter()
            .map(|s| bare_result(s, CheckStatus::Error, e.to_string()))
            .collect();
    }
    specs
        .into_par_iter()
        .map(|s| match implementation(s.id) {
            Some(f) => execute(s, f, ctx),
            None => bare_result(s, CheckStatus::Error, "no implementation registered".into()),
        })
        .collect()
}

// ---- helpers shared by the check modules ----

/// Per-row category keys usable for contingency tables: dictionary codes for
/// interned columns, bit patterns for numeric ones.
pub(crate) fn category_keys(col: &Column) -> Vec<Option<u64>> {
    match &col.data {
        ColumnData::Interned { codes, .. } => codes.iter().map(|c| c.map(u64::from)).collect(),
        ColumnData::Numeric(v) => v.iter().map(|x| x.map(|x| (x + 0.0).to_bits())).collect(),
    }
}

/// Distinct non-null values in a column.
pub(crate) fn distinct_count(col: &Column) -> usize {
    let mut keys: Vec<u64> = category_keys(col).into_iter().flatten().collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

pub(crate) fn require_test<'a>(ctx: &CheckContext<'a>) -> Result<&'a TableFrame, Skip> {
    match ctx.test {
        Some(t) => Ok(t),
        None => skip("no test split provided"),
    }
}

pub(crate) fn require_label(table: &TableFrame) -> Result<&Column, Skip> {
    match table.label() {
        Some(c) => Ok(c),
        None => skip("schema declares no label column"),
    }
}

/// Sorted by value descending, then key; truncated to `k`.
pub(crate) fn top_k(mut entries: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(k);
    entries
}

/// A metric value as written in human-readable text: at most four decimals,
/// trailing zeros trimmed.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" { "0".into() } else { s.to_string() }
}
