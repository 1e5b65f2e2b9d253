//! The fixed set of implemented checks, in execution/report order.

use crate::artifact::CheckCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSpec {
    pub id: &'static str,
    pub category: CheckCategory,
    pub title: &'static str,
}

const fn spec(id: &'static str, category: CheckCategory, title: &'static str) -> CheckSpec {
    CheckSpec { id, category, title }
}

use CheckCategory::{DataIntegrity as DI, ModelEvaluation as ME, TrainTestValidation as TV};

pub const REGISTRY: &[CheckSpec] = &[
    spec("percent_of_nulls", DI, "Percent of nulls"),
    spec("mixed_nulls", DI, "Mixed nulls"),
    spec("mixed_data_types", DI, "Mixed data types"),
    spec("string_mismatch", DI, "String mismatch"),
    spec("special_characters", DI, "Special characters"),
    spec("is_single_value", DI, "Single-value feature"),
    spec("class_imbalance", DI, "Class imbalance"),
    spec("data_duplicates", DI, "Data duplicates"),
    spec("conflicting_labels", DI, "Conflicting labels"),
    spec("outlier_sample_detection", DI, "Outlier samples"),
    spec("feature_label_correlation", DI, "Feature-label correlation"),
    spec("feature_feature_correlation", DI, "Feature-feature correlation"),
    spec("datasets_size_comparison", TV, "Dataset size comparison"),
    spec("new_label", TV, "New labels in test"),
    spec("new_category", TV, "New categories in test"),
    spec("index_leakage", TV, "Index leakage"),
    spec("train_test_samples_mix", TV, "Train-test samples mix"),
    spec("label_drift", TV, "Label drift"),
    spec("feature_drift", TV, "Feature drift"),
    spec("multivariate_drift", TV, "Multivariate drift"),
    spec("single_dataset_performance", ME, "Single dataset performance"),
    spec("train_test_performance", ME, "Train-test performance"),
    spec("confusion_matrix_report", ME, "Confusion matrix"),
    spec("roc_report", ME, "ROC report"),
    spec("calibration_score", ME, "Calibration score"),
    spec("simple_model_comparison", ME, "Simple model comparison"),
    spec("weak_segments_performance", ME, "Weak segments performance"),
    spec("prediction_drift", ME, "Prediction drift"),
];

pub fn find(id: &str) -> Option<&'static CheckSpec> {
    REGISTRY.iter().find(|s| s.id == id)
}

pub fn in_category(category: CheckCategory) -> impl Iterator<Item = &'static CheckSpec> {
    REGISTRY.iter().filter(move |s| s.category == category)
}

pub fn title(id: &str) -> &str {
    find(id).map_or(id, |s| s.title)
}
