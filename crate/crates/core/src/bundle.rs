//! Assembling an artifact bundle from loaded splits.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use crate::artifact::{
    ArtifactBundle, CheckCategory, CheckpointMetadata, PredictionSet, Validate, ValidationError, BUNDLE_VERSION,
    TABULAR_MODALITY,
};
use crate::checks::{compute_dataset_statistics, run_suite, CheckConfig, CheckContext, CheckError};
use crate::table::TableFrame;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Context(#[from] CheckError),
    #[error("assembled bundle is invalid: {0}")]
    Invalid(#[from] ValidationError),
}

/// Inputs for one bundle.
pub struct BundleInputs<'a> {
    pub train: &'a TableFrame,
    pub test: &'a TableFrame,
    pub train_predictions: Option<&'a PredictionSet>,
    pub test_predictions: Option<&'a PredictionSet>,
    pub checkpoint: Option<CheckpointMetadata>,
    pub config: &'a CheckConfig,
    pub created_at: DateTime<Utc>,
    pub client_info: BTreeMap<String, String>,
}

/// Describes both splits and runs all three suites. Without predictions the
/// evaluation suite reports every check as skipped.
pub fn assemble_bundle(inputs: BundleInputs<'_>) -> Result<ArtifactBundle, BundleError> {
    let mut ctx = CheckContext::new(inputs.train, inputs.config).with_test(inputs.test);
    for p in [inputs.train_predictions, inputs.test_predictions].into_iter().flatten() {
        ctx = ctx.with_predictions(p);
    }
    ctx.validate()?;
    let (train_stats, test_stats) =
        rayon::join(|| compute_dataset_statistics(inputs.train), || compute_dataset_statistics(inputs.test));
    let bundle = ArtifactBundle {
        bundle_version: BUNDLE_VERSION.to_string(),
        modality: TABULAR_MODALITY.to_string(),
        created_at: inputs.created_at,
        train_stats,
        test_stats,
        integrity_results: run_suite(CheckCategory::DataIntegrity, &ctx),
        validation_results: run_suite(CheckCategory::TrainTestValidation, &ctx),
        evaluation_results: run_suite(CheckCategory::ModelEvaluation, &ctx),
        checkpoint: inputs.checkpoint,
        client_info: inputs.client_info,
    };
    bundle.validate()?;
    Ok(bundle)
}
