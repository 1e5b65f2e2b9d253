//! `mlfix ingest`: read the datasets and sidecars, run the check suites and
//! write the canonical bundle.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use mlfix_core::artifact::codec::encode_bundle;
use mlfix_core::artifact::{ArtifactBundle, CheckpointMetadata, DatasetSchema, PredictionSet};
use mlfix_core::bundle::{assemble_bundle, BundleInputs};
use mlfix_core::checks::CheckConfig;

use crate::error::{write_atomic, CliError};
use crate::input::{read_csv, read_json, CsvReport};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: PathBuf,
    pub predictions_train: Option<PathBuf>,
    pub predictions_test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Check threshold overrides; unspecified fields keep their defaults.
    pub check_config: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub bundle: ArtifactBundle,
    pub train: CsvReport,
    pub test: CsvReport,
}

/// Bundle timestamp: `SOURCE_DATE_EPOCH` when given (reproducible builds),
/// else the current second.
pub fn bundle_timestamp(source_date_epoch: Option<&str>) -> Result<DateTime<Utc>, CliError> {
    match source_date_epoch {
        Some(raw) => raw
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|s| Utc.timestamp_opt(s, 0).single())
            .ok_or_else(|| CliError::Input(format!("SOURCE_DATE_EPOCH {raw:?} is not a Unix timestamp"))),
        None => {
            let now = Utc::now().timestamp();
            Ok(Utc.timestamp_opt(now, 0).single().unwrap_or_default())
        }
    }
}

fn read_check_config(path: &Path) -> Result<CheckConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: CheckConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

/// Build the bundle and write it to `config.out`. Nothing is written when
/// any input fails.
pub fn ingest(config: &IngestConfig, created_at: DateTime<Utc>) -> Result<IngestOutcome, CliError> {
    let schema: DatasetSchema = read_json(&config.schema)?;
    let check_config = match &config.check_config {
        Some(p) => read_check_config(p)?,
        None => CheckConfig::default(),
    };
    let (train, train_report) = read_csv(&config.train, &schema)?;
    let (test, test_report) = read_csv(&config.test, &schema)?;
    let train_predictions: Option<PredictionSet> = config.predictions_train.as_deref().map(read_json).transpose()?;
    let test_predictions: Option<PredictionSet> = config.predictions_test.as_deref().map(read_json).transpose()?;
    let checkpoint: Option<CheckpointMetadata> = config.checkpoint.as_deref().map(read_json).transpose()?;

    let client_info = BTreeMap::from([
        ("client".to_string(), "mlfix-cli".to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    let bundle = assemble_bundle(BundleInputs {
        train: &train,
        test: &test,
        train_predictions: train_predictions.as_ref(),
        test_predictions: test_predictions.as_ref(),
        checkpoint,
        config: &check_config,
        created_at,
        client_info,
    })
    .map_err(|e| CliError::Input(e.to_string()))?;
    let bytes = encode_bundle(&bundle).map_err(|e| CliError::Malformed(e.to_string()))?;
    write_atomic(&config.out, &bytes)?;
    Ok(IngestOutcome {
        bundle,
        train: train_report,
        test: test_report,
    })
}
