use std::collections::{BTreeSet, HashSet};

use super::*;
use crate::checks::registry;

/// An invariant violation, located by a JSON-style field path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    fn nested(self, prefix: &str) -> Self {
        let path = if self.path.is_empty() {
            prefix.to_string()
        } else if self.path.starts_with('[') {
            format!("{prefix}{}", self.path)
        } else {
            format!("{prefix}.{}", self.path)
        };
        Self { path, ..self }
    }
}

/// Type-level invariants checked before encoding and after decoding.
pub trait Validate {
    fn validate(&self) -> Result<(), ValidationError>;
}

type VResult = Result<(), ValidationError>;

fn ensure(cond: bool, path: impl Into<String>, message: impl Into<String>) -> VResult {
    if cond {
        Ok(())
    } else {
        Err(ValidationError::new(path, message))
    }
}

fn finite(value: f64, path: impl Into<String>, what: &str) -> VResult {
    ensure(value.is_finite(), path, format!("non-finite {what}"))
}

fn unit_interval(value: f64, path: impl Into<String>) -> VResult {
    ensure(
        value.is_finite() && (0.0..=1.0).contains(&value),
        path,
        format!("value {value} outside [0, 1]"),
    )
}

impl Validate for DatasetSchema {
    fn validate(&self) -> VResult {
        let mut seen = HashSet::new();
        for (i, col) in self.columns.iter().enumerate() {
            ensure(!col.name.is_empty(), format!("columns[{i}].name"), "empty column name")?;
            ensure(
                seen.insert(col.name.as_str()),
                format!("columns[{i}].name"),
                format!("duplicate column name {:?}", col.name),
            )?;
        }
        if let Some(label) = &self.label_column {
            let spec = self.column(label);
            ensure(spec.is_some(), "label_column", format!("undeclared column {label:?}"))?;
            ensure(
                !matches!(spec.map(|s| s.kind), Some(ColumnKind::Identifier | ColumnKind::Text)),
                "label_column",
                "label must be numeric, categorical or datetime",
            )?;
            if self.task == Task::Regression {
                ensure(
                    spec.is_some_and(|s| s.kind.is_numeric_like()),
                    "label_column",
                    "regression label must be numeric",
                )?;
            }
        }
        if let Some(index) = &self.index_column {
            ensure(self.column(index).is_some(), "index_column", format!("undeclared column {index:?}"))?;
            ensure(
                self.label_column.as_deref() != Some(index.as_str()),
                "index_column",
                "index and label must differ",
            )?;
        }
        Ok(())
    }
}

impl Validate for NumericSummary {
    fn validate(&self) -> VResult {
        for (name, v) in [
            ("min", self.min),
            ("max", self.max),
            ("mean", self.mean),
            ("std", self.std),
            ("q1", self.q1),
            ("median", self.median),
            ("q3", self.q3),
        ] {
            finite(v, name, "summary value")?;
        }
        ensure(
            self.min <= self.q1 && self.q1 <= self.median && self.median <= self.q3 && self.q3 <= self.max,
            "",
            "quartiles not monotone",
        )?;
        ensure(self.std >= 0.0, "std", "negative standard deviation")
    }
}

impl Validate for DatasetStatistics {
    fn validate(&self) -> VResult {
        for (i, col) in self.per_column.iter().enumerate() {
            let at = format!("per_column[{i}]");
            unit_interval(col.null_fraction, format!("{at}.null_fraction"))?;
            if let Some(summary) = &col.numeric_summary {
                summary.validate().map_err(|e| e.nested(&format!("{at}.numeric_summary")))?;
            }
            for (j, cat) in col.top_categories.iter().flatten().enumerate() {
                unit_interval(cat.frequency, format!("{at}.top_categories[{j}].frequency"))?;
            }
        }
        if let Some(dist) = &self.class_distribution {
            let total: u64 = dist.values().sum();
            ensure(
                total <= self.sample_count,
                "class_distribution",
                format!("class counts sum to {total} > sample_count {}", self.sample_count),
            )?;
        }
        Ok(())
    }
}

impl Validate for CheckResult {
    fn validate(&self) -> VResult {
        let spec = registry::find(&self.check_id);
        ensure(spec.is_some(), "check_id", format!("unknown check {:?}", self.check_id))?;
        ensure(
            spec.is_some_and(|s| s.category == self.category),
            "category",
            format!("check {:?} does not belong to {}", self.check_id, self.category),
        )?;
        for (name, v) in &self.metrics {
            finite(*v, format!("metrics.{name}"), "metric")?;
        }
        for (name, v) in &self.details {
            finite(*v, format!("details.{name}"), "detail value")?;
        }
        if self.status == CheckStatus::Error {
            ensure(!self.summary.is_empty(), "summary", "error result without a reason")?;
        }
        Ok(())
    }
}

impl Validate for Scalar {
    fn validate(&self) -> VResult {
        match self {
            Scalar::Number(x) => finite(*x, "", "number"),
            _ => Ok(()),
        }
    }
}

impl Validate for CheckpointMetadata {
    fn validate(&self) -> VResult {
        if let Some(k) = self.num_classes {
            ensure(k >= 2, "num_classes", "num_classes must be at least 2")?;
        }
        for (k, v) in &self.training_config {
            v.validate().map_err(|e| e.nested(&format!("training_config.{k}")))?;
        }
        Ok(())
    }
}

impl Validate for PredictionSet {
    fn validate(&self) -> VResult {
        for (i, label) in self.predicted_labels.iter().enumerate() {
            if let LabelValue::Number(x) = label {
                finite(*x, format!("predicted_labels[{i}]"), "label")?;
            }
        }
        if let Some(probs) = &self.probabilities {
            ensure(
                probs.len() == self.predicted_labels.len(),
                "probabilities",
                "row count differs from predicted_labels",
            )?;
            let width = self.class_order.as_ref().map(Vec::len);
            ensure(width.is_some(), "class_order", "required when probabilities are given")?;
            for (i, row) in probs.iter().enumerate() {
                ensure(
                    Some(row.len()) == width,
                    format!("probabilities[{i}]"),
                    "row width differs from class_order",
                )?;
                for (j, p) in row.iter().enumerate() {
                    unit_interval(*p, format!("probabilities[{i}][{j}]"))?;
                }
                let sum: f64 = row.iter().sum();
                ensure(
                    (sum - 1.0).abs() <= 1e-6,
                    format!("probabilities[{i}]"),
                    format!("row sums to {sum}, expected 1"),
                )?;
            }
        }
        Ok(())
    }
}

fn validate_section(results: &[CheckResult], category: CheckCategory, name: &str) -> VResult {
    let mut seen = HashSet::new();
    for (i, r) in results.iter().enumerate() {
        let at = format!("{name}[{i}]");
        r.validate().map_err(|e| e.nested(&at))?;
        ensure(
            r.category == category,
            format!("{at}.category"),
            format!("expected {category}"),
        )?;
        ensure(
            seen.insert(r.check_id.as_str()),
            format!("{at}.check_id"),
            format!("duplicate check {:?}", r.check_id),
        )?;
    }
    Ok(())
}

impl Validate for ArtifactBundle {
    fn validate(&self) -> VResult {
        let major = self.bundle_version.split('.').next().unwrap_or_default();
        ensure(
            major == "1",
            "bundle_version",
            format!("unsupported bundle version {:?}", self.bundle_version),
        )?;
        ensure(
            self.modality == TABULAR_MODALITY,
            "modality",
            format!("unsupported modality {:?}", self.modality),
        )?;
        self.train_stats.validate().map_err(|e| e.nested("train_stats"))?;
        self.test_stats.validate().map_err(|e| e.nested("test_stats"))?;
        validate_section(&self.integrity_results, CheckCategory::DataIntegrity, "integrity_results")?;
        validate_section(
            &self.validation_results,
            CheckCategory::TrainTestValidation,
            "validation_results",
        )?;
        validate_section(&self.evaluation_results, CheckCategory::ModelEvaluation, "evaluation_results")?;
        if let Some(cp) = &self.checkpoint {
            cp.validate().map_err(|e| e.nested("checkpoint"))?;
        }
        Ok(())
    }
}

impl Validate for Finding {
    fn validate(&self) -> VResult {
        ensure(!self.finding_id.is_empty(), "finding_id", "empty finding id")?;
        unit_interval(self.confidence, "confidence")?;
        for (i, ev) in self.evidence.iter().enumerate() {
            finite(ev.value, format!("evidence[{i}].value"), "evidence value")?;
        }
        Ok(())
    }
}

impl Validate for Hypothesis {
    fn validate(&self) -> VResult {
        ensure(
            !self.supporting_findings.is_empty(),
            "supporting_findings",
            "hypothesis without supporting findings",
        )?;
        unit_interval(self.plausibility, "plausibility")
    }
}

impl Validate for Diagnosis {
    fn validate(&self) -> VResult {
        let mut ids = BTreeSet::new();
        let mut has_high = false;
        for (i, rf) in self.ranked_findings.iter().enumerate() {
            let at = format!("ranked_findings[{i}]");
            rf.finding.validate().map_err(|e| e.nested(&format!("{at}.finding")))?;
            finite(rf.rank_score, format!("{at}.rank_score"), "rank score")?;
            ensure(
                ids.insert(rf.finding.finding_id.as_str()),
                format!("{at}.finding.finding_id"),
                "duplicate finding id",
            )?;
            if i > 0 {
                ensure(
                    self.ranked_findings[i - 1].rank_score >= rf.rank_score,
                    format!("{at}.rank_score"),
                    "findings not sorted by rank_score",
                )?;
            }
            has_high |= rf.finding.severity.at_least(Severity::High);
        }
        for (i, h) in self.hypotheses.iter().enumerate() {
            let at = format!("hypotheses[{i}]");
            h.validate().map_err(|e| e.nested(&at))?;
            for (j, id) in h.supporting_findings.iter().enumerate() {
                ensure(
                    ids.contains(id.as_str()),
                    format!("{at}.supporting_findings[{j}]"),
                    format!("unknown finding {id:?}"),
                )?;
            }
        }
        for (i, a) in self.actions.iter().enumerate() {
            for (j, id) in a.linked_findings.iter().enumerate() {
                ensure(
                    ids.contains(id.as_str()),
                    format!("actions[{i}].linked_findings[{j}]"),
                    format!("unknown finding {id:?}"),
                )?;
            }
        }
        ensure(
            !has_high || !self.actions.is_empty(),
            "actions",
            "high-severity findings without actions",
        )?;
        unit_interval(self.consensus.agreement, "consensus.agreement")?;
        unit_interval(self.consensus.confidence, "consensus.confidence")
    }
}

impl Validate for LlmRequest {
    fn validate(&self) -> VResult {
        ensure(!self.messages.is_empty(), "messages", "request without messages")?;
        ensure(
            self.temperature.is_finite() && (0.0..=2.0).contains(&self.temperature),
            "temperature",
            "temperature must lie in [0, 2]",
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            columns: vec![
                ColumnSpec::new("x", ColumnKind::Numeric),
                ColumnSpec::new("y", ColumnKind::Categorical),
            ],
            label_column: Some("y".into()),
            index_column: None,
            task: Task::Classification,
        }
    }

    #[test]
    fn schema_rejects_duplicates_and_unknown_label() {
        assert!(schema().validate().is_ok());
        let mut dup = schema();
        dup.columns.push(ColumnSpec::new("x", ColumnKind::Text));
        assert_eq!(dup.validate().unwrap_err().path, "columns[2].name");
        let mut bad = schema();
        bad.label_column = Some("nope".into());
        assert_eq!(bad.validate().unwrap_err().path, "label_column");
    }

    #[test]
    fn identifiers_are_never_features() {
        let mut s = schema();
        s.columns.push(ColumnSpec::new("id", ColumnKind::Identifier));
        let features: Vec<_> = s.feature_columns().map(|(_, c)| c.name.as_str()).collect();
        assert_eq!(features, vec!["x"]);
    }

    #[test]
    fn probability_rows_must_sum_to_one() {
        let set = PredictionSet {
            dataset_ref: DatasetRef::Test,
            predicted_labels: vec![LabelValue::Text("a".into())],
            probabilities: Some(vec![vec![0.5, 0.4]]),
            class_order: Some(vec!["a".into(), "b".into()]),
        };
        assert_eq!(set.validate().unwrap_err().path, "probabilities[0]");
    }
}
