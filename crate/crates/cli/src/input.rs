//! CSV and JSON sidecar readers.

use std::path::Path;

use mlfix_core::artifact::codec::decode;
use mlfix_core::artifact::{DatasetSchema, Validate};
use mlfix_core::table::{TableBuilder, TableFrame};
use serde::de::DeserializeOwned;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvReport {
    pub rows: usize,
    /// Numeric or datetime cells that failed to parse and became nulls.
    pub parse_failures: usize,
}

/// Read a headed CSV file into a table laid out in schema order. Header
/// order is free; every header must name a schema column and vice versa.
/// Error messages cite paths, columns and line numbers, never cell values.
pub fn read_csv(path: &Path, schema: &DatasetSchema) -> Result<(TableFrame, CsvReport), CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let at = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));

    let headers = reader.headers().map_err(at)?.clone();
    let mut slot_of_schema = vec![None; schema.columns.len()];
    for (i, name) in headers.iter().enumerate() {
        let pos = schema.position(name.trim()).ok_or_else(|| {
            CliError::Input(format!("{}: column {:?} is not in the schema", path.display(), name.trim()))
        })?;
        if slot_of_schema[pos].replace(i).is_some() {
            return Err(CliError::Input(format!("{}: column {name:?} appears twice", path.display())));
        }
    }
    let order: Vec<usize> = slot_of_schema
        .iter()
        .zip(&schema.columns)
        .map(|(slot, col)| {
            slot.ok_or_else(|| CliError::Input(format!("{}: missing column {:?}", path.display(), col.name)))
        })
        .collect::<Result<_, _>>()?;

    let mut builder = TableBuilder::new(schema.clone()).map_err(|e| CliError::Input(e.to_string()))?;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(at)? {
        if record.len() != headers.len() {
            let line = record.position().map_or(0, |p| p.line());
            return Err(CliError::Input(format!(
                "{}:{line}: expected {} fields, found {}",
                path.display(),
                headers.len(),
                record.len()
            )));
        }
        let cells: Vec<&str> = order.iter().map(|&i| &record[i]).collect();
        builder.push_row(&cells).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let parse_failures = builder.parse_failures();
    let table = builder.finish().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let report = CsvReport {
        rows: table.row_count,
        parse_failures,
    };
    Ok((table, report))
}

/// Read and validate a JSON sidecar.
pub fn read_json<T: DeserializeOwned + Validate>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
