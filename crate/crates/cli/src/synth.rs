//! Seeded synthetic datasets: the broken-partition scenario and a wide
//! table for throughput runs.

use std::path::{Path, PathBuf};

use mlfix_core::artifact::{ColumnKind, ColumnSpec, DatasetSchema, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Train labels {A, B}; test labels {A, X, Y, Z}. Three of the four test
/// labels never occur in training and the split-label association is
/// Cramér's V ≈ 0.9205.
pub const PARTITION_TRAIN: &[(&str, usize)] = &[("A", 100), ("B", 900)];
pub const PARTITION_TEST: &[(&str, usize)] = &[("A", 75), ("X", 105), ("Y", 105), ("Z", 105)];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: PathBuf,
}

impl SynthPaths {
    fn in_dir(dir: &Path) -> Self {
        Self {
            train: dir.join("train.csv"),
            test: dir.join("test.csv"),
            schema: dir.join("schema.json"),
        }
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_dataset(
    dir: &Path,
    schema: &DatasetSchema,
    train: &[Vec<String>],
    test: &[Vec<String>],
) -> Result<SynthPaths, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let paths = SynthPaths::in_dir(dir);
    let header: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    write_csv(&paths.train, &header, train)?;
    write_csv(&paths.test, &header, test)?;
    let text = serde_json::to_string_pretty(schema).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(&paths.schema, text + "\n")
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", paths.schema.display())))?;
    Ok(paths)
}

pub fn partition_schema() -> DatasetSchema {
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

fn partition_rows(labels: &[(&str, usize)], id_offset: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
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

/// Write the broken-partition scenario. A `sentinel` replaces one training
/// row's region and identifier cells, for privacy audits.
pub fn write_partition(dir: &Path, seed: u64, sentinel: Option<&str>) -> Result<SynthPaths, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = partition_rows(PARTITION_TRAIN, 0, &mut rng);
    let test = partition_rows(PARTITION_TEST, 100_000, &mut rng);
    if let Some(s) = sentinel {
        train[0][0] = s.to_string();
        train[0][3] = s.to_string();
    }
    write_dataset(dir, &partition_schema(), &train, &test)
}

/// Column layout of the wide table: an identifier, numeric and categorical
/// features, and a binary label; `columns` counts all of them.
pub fn wide_schema(columns: usize) -> DatasetSchema {
    let features = columns.saturating_sub(2).max(1);
    let categorical = features / 3;
    let mut cols = vec![ColumnSpec::new("id", ColumnKind::Identifier)];
    for i in 0..features - categorical {
        cols.push(ColumnSpec::new(format!("num_{i:02}"), ColumnKind::Numeric));
    }
    for i in 0..categorical {
        cols.push(ColumnSpec::new(format!("cat_{i:02}"), ColumnKind::Categorical));
    }
    cols.push(ColumnSpec::new("label", ColumnKind::Categorical));
    DatasetSchema {
        columns: cols,
        label_column: Some("label".into()),
        index_column: Some("id".into()),
        task: Task::Classification,
    }
}

fn wide_rows(schema: &DatasetSchema, n: usize, id_offset: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    (0..n)
        .map(|r| {
            let signal: f64 = rng.random_range(-1.0..1.0);
            schema
                .columns
                .iter()
                .map(|c| match c.kind {
                    ColumnKind::Identifier => format!("row{}", id_offset + r),
                    ColumnKind::Numeric => format!("{:.4}", signal + rng.random_range(-2.0..2.0)),
                    _ if c.name == "label" => {
                        let noisy = signal + rng.random_range(-0.5..0.5);
                        if noisy > 0.0 { "pos" } else { "neg" }.to_string()
                    }
                    _ => format!("level{}", rng.random_range(0..8)),
                })
                .collect()
        })
        .collect()
}

/// Write a wide table of `rows` training rows and `rows / 4` test rows drawn
/// from the same distribution.
pub fn write_wide(dir: &Path, rows: usize, columns: usize, seed: u64) -> Result<SynthPaths, CliError> {
    let schema = wide_schema(columns);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = wide_rows(&schema, rows, 0, &mut rng);
    let test = wide_rows(&schema, rows / 4, rows, &mut rng);
    write_dataset(dir, &schema, &train, &test)
}
