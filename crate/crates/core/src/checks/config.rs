use std::fmt;

use serde::{Deserialize, Serialize};

/// Thresholds and tuning for every registered check.
///
/// Only `label_drift_threshold` has an externally sourced default (0.15, the
/// Cramér's V bound used for label drift); the rest are project defaults.
/// Each value is echoed in the `condition` string of the result it governs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub max_null_fraction: f64,
    pub max_distinct_null_tokens: f64,
    pub mixed_types_band: (f64, f64),
    pub max_special_character_fraction: f64,
    pub min_imbalance_ratio: f64,
    pub max_duplicate_fraction: f64,
    pub outlier_score_threshold: f64,
    pub max_outlier_fraction: f64,
    pub max_feature_label_correlation: f64,
    pub max_feature_feature_correlation: f64,
    /// Categorical columns with more distinct values are left out of
    /// association measures (correlations, segment scans).
    pub max_association_categories: usize,
    pub min_test_train_size_ratio: f64,
    pub max_new_category_fraction: f64,
    pub max_samples_mix_fraction: f64,
    pub label_drift_threshold: f64,
    pub feature_drift_threshold: f64,
    pub feature_drift_top_k: usize,
    pub multivariate_drift_threshold: f64,
    pub max_performance_gap: f64,
    pub min_auc: f64,
    pub max_ece: f64,
    pub min_baseline_lift: f64,
    pub weak_segment_min_support: f64,
    pub weak_segment_accuracy_drop: f64,
    pub prediction_drift_threshold: f64,
    pub outlier_z_cap: f64,
    pub ece_bins: usize,
    pub drift_tree_depth: usize,
    /// Rows drawn per split for the domain classifier.
    pub drift_sample_size: usize,
    pub drift_min_leaf_fraction: f64,
    pub random_seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            max_null_fraction: 0.05,
            max_distinct_null_tokens: 1.0,
            mixed_types_band: (0.0, 0.1),
            max_special_character_fraction: 0.001,
            min_imbalance_ratio: 0.1,
            max_duplicate_fraction: 0.05,
            outlier_score_threshold: 3.5,
            max_outlier_fraction: 0.01,
            max_feature_label_correlation: 0.9,
            max_feature_feature_correlation: 0.9,
            max_association_categories: 100,
            min_test_train_size_ratio: 0.1,
            max_new_category_fraction: 0.01,
            max_samples_mix_fraction: 0.01,
            label_drift_threshold: 0.15,
            feature_drift_threshold: 0.2,
            feature_drift_top_k: 5,
            multivariate_drift_threshold: 0.25,
            max_performance_gap: 0.1,
            min_auc: 0.7,
            max_ece: 0.1,
            min_baseline_lift: 1.1,
            weak_segment_min_support: 0.05,
            weak_segment_accuracy_drop: 0.2,
            prediction_drift_threshold: 0.2,
            outlier_z_cap: 10.0,
            ece_bins: 10,
            drift_tree_depth: 3,
            drift_sample_size: 10_000,
            drift_min_leaf_fraction: 0.01,
            random_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("check config field {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl CheckConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = [
            ("max_null_fraction", self.max_null_fraction),
            ("max_special_character_fraction", self.max_special_character_fraction),
            ("min_imbalance_ratio", self.min_imbalance_ratio),
            ("max_duplicate_fraction", self.max_duplicate_fraction),
            ("max_outlier_fraction", self.max_outlier_fraction),
            ("max_feature_label_correlation", self.max_feature_label_correlation),
            ("max_feature_feature_correlation", self.max_feature_feature_correlation),
            ("max_new_category_fraction", self.max_new_category_fraction),
            ("max_samples_mix_fraction", self.max_samples_mix_fraction),
            ("label_drift_threshold", self.label_drift_threshold),
            ("feature_drift_threshold", self.feature_drift_threshold),
            ("multivariate_drift_threshold", self.multivariate_drift_threshold),
            ("max_performance_gap", self.max_performance_gap),
            ("min_auc", self.min_auc),
            ("max_ece", self.max_ece),
            ("weak_segment_min_support", self.weak_segment_min_support),
            ("weak_segment_accuracy_drop", self.weak_segment_accuracy_drop),
            ("prediction_drift_threshold", self.prediction_drift_threshold),
            ("drift_min_leaf_fraction", self.drift_min_leaf_fraction),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError {
                    field,
                    message: format!("{v} outside [0, 1]"),
                });
            }
        }
        let positive = [
            ("max_distinct_null_tokens", self.max_distinct_null_tokens),
            ("outlier_score_threshold", self.outlier_score_threshold),
            ("outlier_z_cap", self.outlier_z_cap),
            ("min_test_train_size_ratio", self.min_test_train_size_ratio),
            ("min_baseline_lift", self.min_baseline_lift),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError {
                    field,
                    message: format!("{v} must be positive"),
                });
            }
        }
        let (lo, hi) = self.mixed_types_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(ConfigError {
                field: "mixed_types_band",
                message: format!("({lo}, {hi}) is not an interval in [0, 1]"),
            });
        }
        if self.ece_bins < 2 {
            return Err(ConfigError {
                field: "ece_bins",
                message: "must be at least 2".into(),
            });
        }
        if self.drift_tree_depth == 0 || self.drift_sample_size < 20 || self.feature_drift_top_k == 0 {
            return Err(ConfigError {
                field: "drift_tree_depth",
                message: "drift settings must be positive (sample size ≥ 20)".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    AtMost(f64),
    AtLeast(f64),
    Equals(f64),
    /// Passes when the value is outside the open interval.
    OutsideOpen(f64, f64),
}

/// Machine-readable threshold expression, rendered as e.g. `cramers_v ≤ 0.15`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub metric: String,
    pub comparison: Comparison,
}

impl Condition {
    pub fn new(metric: impl Into<String>, comparison: Comparison) -> Self {
        Self {
            metric: metric.into(),
            comparison,
        }
    }

    pub fn holds(&self, value: f64) -> bool {
        match self.comparison {
            Comparison::AtMost(t) => value <= t,
            Comparison::AtLeast(t) => value >= t,
            Comparison::Equals(t) => value == t,
            Comparison::OutsideOpen(lo, hi) => !(lo < value && value < hi),
        }
    }

    /// Whether `value` misses the threshold by more than `factor`×: above
    /// factor·t for upper bounds, below t/factor for lower bounds.
    pub fn violated_by_factor(&self, value: f64, factor: f64) -> bool {
        match self.comparison {
            Comparison::AtMost(t) | Comparison::Equals(t) => value > factor * t,
            Comparison::AtLeast(t) => value < t / factor,
            Comparison::OutsideOpen(..) => false,
        }
    }

    /// The numeric threshold, when the comparison has a single one.
    pub fn threshold(&self) -> Option<f64> {
        match self.comparison {
            Comparison::AtMost(t) | Comparison::AtLeast(t) | Comparison::Equals(t) => Some(t),
            Comparison::OutsideOpen(..) => None,
        }
    }

    pub fn parse(text: &str) -> Option<Condition> {
        let text = text.trim();
        if let Some((metric, rest)) = text.split_once(" ∉ (") {
            let (lo, hi) = rest.strip_suffix(')')?.split_once(',')?;
            return Some(Condition::new(
                metric.trim(),
                Comparison::OutsideOpen(lo.trim().parse().ok()?, hi.trim().parse().ok()?),
            ));
        }
        for (op, make) in [
            (" ≤ ", Comparison::AtMost as fn(f64) -> Comparison),
            (" ≥ ", Comparison::AtLeast),
            (" == ", Comparison::Equals),
        ] {
            if let Some((metric, t)) = text.split_once(op) {
                return Some(Condition::new(metric.trim(), make(t.trim().parse().ok()?)));
            }
        }
        None
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.comparison {
            Comparison::AtMost(t) => write!(f, "{} ≤ {t}", self.metric),
            Comparison::AtLeast(t) => write!(f, "{} ≥ {t}", self.metric),
            Comparison::Equals(t) => write!(f, "{} == {t}", self.metric),
            Comparison::OutsideOpen(lo, hi) => write!(f, "{} ∉ ({lo}, {hi})", self.metric),
        }
    }
}
