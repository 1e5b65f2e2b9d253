//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use mlfix_core::artifact::{ArtifactBundle, ColumnKind, ColumnSpec, DatasetSchema, Task};
use mlfix_core::bundle::{assemble_bundle, BundleInputs};
use mlfix_core::checks::CheckConfig;
use mlfix_core::table::{table_from_rows, TableFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn schema() -> DatasetSchema {
    DatasetSchema {
        columns: vec![
            ColumnSpec::new("id", ColumnKind::Identifier),
            ColumnSpec::new("age", ColumnKind::Numeric),
            ColumnSpec::new("income", ColumnKind::Numeric),
            ColumnSpec::new("region", ColumnKind::Categorical),
            ColumnSpec::new("target", ColumnKind::Categorical),
        ],
        label_column: Some("target".into()),
        index_column: Some("id".into()),
        task: Task::Classification,
    }
}

/// Rows whose features are drawn independently of the label.
pub fn rows(labels: &[(&str, usize)], id_offset: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let regions = ["north", "south", "east", "west"];
    let mut out = Vec::new();
    for (label, count) in labels {
        for _ in 0..*count {
            let id = id_offset + out.len();
            out.push(vec![
                format!("r{id}"),
                format!("{}", rng.random_range(18..80)),
                format!("{:.2}", rng.random_range(20_000.0..120_000.0)),
                regions[rng.random_range(0..4)].to_string(),
                label.to_string(),
            ]);
        }
    }
    out
}

pub fn table(labels: &[(&str, usize)], id_offset: usize, seed: u64) -> TableFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    table_from_rows(schema(), &rows(labels, id_offset, &mut rng)).unwrap()
}

/// Train labels {A, B}; test labels {A, X, Y, Z}: three of four test labels
/// unseen, origin-label association near 0.92.
pub const PARTITION_TRAIN: &[(&str, usize)] = &[("A", 100), ("B", 900)];
pub const PARTITION_TEST: &[(&str, usize)] = &[("A", 75), ("X", 105), ("Y", 105), ("Z", 105)];

pub fn bundle_for(train: &TableFrame, test: &TableFrame) -> ArtifactBundle {
    assemble_bundle(BundleInputs {
        train,
        test,
        train_predictions: None,
        test_predictions: None,
        checkpoint: None,
        config: &CheckConfig::default(),
        created_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        client_info: BTreeMap::new(),
    })
    .unwrap()
}

pub fn partition_bundle() -> ArtifactBundle {
    bundle_for(&table(PARTITION_TRAIN, 0, 1), &table(PARTITION_TEST, 10_000, 2))
}

pub fn clean_bundle() -> ArtifactBundle {
    bundle_for(&table(&[("A", 500), ("B", 500)], 0, 3), &table(&[("A", 150), ("B", 150)], 10_000, 4))
}
