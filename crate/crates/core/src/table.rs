//! Typed columnar tables with explicit null markers.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::artifact::{ColumnKind, DatasetSchema, Validate, ValidationError};

/// Raw tokens (after trimming and case folding) that read as null.
pub const NULL_TOKENS: [&str; 5] = ["", "null", "nan", "none", "n/a"];

pub fn null_token(raw: &str) -> Option<String> {
    let folded = raw.trim().to_lowercase();
    NULL_TOKENS.contains(&folded.as_str()).then_some(folded)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Numeric and datetime columns (datetimes as epoch seconds).
    Numeric(Vec<Option<f64>>),
    /// Categorical, text and identifier columns, interned.
    Interned {
        codes: Vec<Option<u32>>,
        dictionary: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub data: ColumnData,
    /// Counts of distinct null-like raw tokens seen while reading.
    pub null_tokens: BTreeMap<String, usize>,
    /// Cells that failed to parse as the declared kind (stored as null).
    pub parse_failures: usize,
}

impl Column {
    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Interned { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_null(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Interned { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn null_count(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.iter().filter(|x| x.is_none()).count(),
            ColumnData::Interned { codes, .. } => codes.iter().filter(|x| x.is_none()).count(),
        }
    }

    pub fn numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Interned { .. } => None,
        }
    }

    pub fn interned(&self) -> Option<(&[Option<u32>], &[String])> {
        match &self.data {
            ColumnData::Interned { codes, dictionary } => Some((codes, dictionary)),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Cell as an owned string, for categorical comparisons across tables.
    pub fn string_at(&self, row: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Interned { codes, dictionary } => codes[row].map(|c| dictionary[c as usize].as_str()),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Non-null values of a numeric column.
    pub fn present_values(&self) -> Vec<f64> {
        self.numeric()
            .map(|v| v.iter().flatten().copied().collect())
            .unwrap_or_default()
    }
}

/// Hashable identity of a single cell, comparable across tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKey<'a> {
    Null,
    Number(u64),
    Text(&'a str),
}

impl Column {
    pub fn cell_key(&self, row: usize) -> CellKey<'_> {
        match &self.data {
            ColumnData::Numeric(v) => match v[row] {
                // normalise -0.0 so that equal values hash equally
                Some(x) => CellKey::Number((x + 0.0).to_bits()),
                None => CellKey::Null,
            },
            ColumnData::Interned { codes, dictionary } => match codes[row] {
                Some(c) => CellKey::Text(&dictionary[c as usize]),
                None => CellKey::Null,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableFrame {
    pub schema: DatasetSchema,
    pub row_count: usize,
    /// One column per schema entry, in schema order.
    pub columns: Vec<Column>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("invalid schema: {0}")]
    Schema(#[from] ValidationError),
    #[error("column {column:?} has {actual} cells, expected {expected}")]
    Length {
        column: String,
        actual: usize,
        expected: usize,
    },
    #[error("column {0:?} holds a non-finite number")]
    NonFinite(String),
    #[error("row {row} has {actual} fields, expected {expected}")]
    RowWidth { row: usize, actual: usize, expected: usize },
}

impl TableFrame {
    pub fn new(schema: DatasetSchema, columns: Vec<Column>) -> Result<Self, TableError> {
        schema.validate()?;
        let row_count = columns.first().map_or(0, Column::len);
        for col in &columns {
            if col.len() != row_count {
                return Err(TableError::Length {
                    column: col.name.clone(),
                    actual: col.len(),
                    expected: row_count,
                });
            }
            if let Some(v) = col.numeric() {
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(TableError::NonFinite(col.name.clone()));
                }
            }
        }
        Ok(Self {
            schema,
            row_count,
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.schema.position(name).map(|i| &self.columns[i])
    }

    pub fn label(&self) -> Option<&Column> {
        self.schema.label_column.as_deref().and_then(|l| self.column(l))
    }

    pub fn index(&self) -> Option<&Column> {
        self.schema.index_column.as_deref().and_then(|l| self.column(l))
    }

    pub fn features(&self) -> impl Iterator<Item = &Column> {
        self.schema.feature_columns().map(move |(i, _)| &self.columns[i])
    }

    /// Label cells as strings (classification) for every row.
    pub fn label_strings(&self) -> Option<Vec<Option<String>>> {
        let col = self.label()?;
        Some(
            (0..self.row_count)
                .map(|r| match &col.data {
                    ColumnData::Interned { .. } => col.string_at(r).map(str::to_string),
                    ColumnData::Numeric(v) => v[r].map(|x| format!("{x}")),
                })
                .collect(),
        )
    }
}

/// Row-at-a-time construction from raw string cells, applying the
/// per-kind parsing rules (null tokens, numeric and datetime parsing).
pub struct TableBuilder {
    schema: DatasetSchema,
    columns: Vec<ColumnBuilder>,
    rows: usize,
}

enum Store {
    Numeric(Vec<Option<f64>>),
    Interned {
        codes: Vec<Option<u32>>,
        dictionary: Vec<String>,
        lookup: HashMap<String, u32>,
    },
}

struct ColumnBuilder {
    kind: ColumnKind,
    store: Store,
    null_tokens: BTreeMap<String, usize>,
    parse_failures: usize,
}

impl ColumnBuilder {
    fn push(&mut self, raw: &str) {
        if let Some(tok) = null_token(raw) {
            *self.null_tokens.entry(tok).or_default() += 1;
            match &mut self.store {
                Store::Numeric(v) => v.push(None),
                Store::Interned { codes, .. } => codes.push(None),
            }
            return;
        }
        match &mut self.store {
            Store::Numeric(v) => {
                let parsed = match self.kind {
                    ColumnKind::Datetime => parse_datetime(raw),
                    _ => raw.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
                };
                if parsed.is_none() {
                    self.parse_failures += 1;
                }
                v.push(parsed);
            }
            Store::Interned {
                codes,
                dictionary,
                lookup,
            } => {
                let code = match lookup.get(raw) {
                    Some(&c) => c,
                    None => {
                        let c = dictionary.len() as u32;
                        dictionary.push(raw.to_string());
                        lookup.insert(raw.to_string(), c);
                        c
                    }
                };
                codes.push(Some(code));
            }
        }
    }
}

/// Epoch seconds for RFC 3339, `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DD`.
pub fn parse_datetime(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp() as f64);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp() as f64)
}

impl TableBuilder {
    pub fn new(schema: DatasetSchema) -> Result<Self, TableError> {
        schema.validate()?;
        let columns = schema
            .columns
            .iter()
            .map(|c| ColumnBuilder {
                kind: c.kind,
                store: if c.kind.is_numeric_like() {
                    Store::Numeric(Vec::new())
                } else {
                    Store::Interned {
                        codes: Vec::new(),
                        dictionary: Vec::new(),
                        lookup: HashMap::new(),
                    }
                },
                null_tokens: BTreeMap::new(),
                parse_failures: 0,
            })
            .collect();
        Ok(Self {
            schema,
            columns,
            rows: 0,
        })
    }

    /// Push one row given in schema column order.
    pub fn push_row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<(), TableError> {
        if cells.len() != self.columns.len() {
            return Err(TableError::RowWidth {
                row: self.rows,
                actual: cells.len(),
                expected: self.columns.len(),
            });
        }
        for (col, cell) in self.columns.iter_mut().zip(cells) {
            col.push(cell.as_ref());
        }
        self.rows += 1;
        Ok(())
    }

    pub fn parse_failures(&self) -> usize {
        self.columns.iter().map(|c| c.parse_failures).sum()
    }

    pub fn finish(self) -> Result<TableFrame, TableError> {
        let columns = self
            .schema
            .columns
            .iter()
            .zip(self.columns)
            .map(|(spec, b)| Column {
                name: spec.name.clone(),
                kind: spec.kind,
                data: match b.store {
                    Store::Numeric(v) => ColumnData::Numeric(v),
                    Store::Interned { codes, dictionary, .. } => ColumnData::Interned { codes, dictionary },
                },
                null_tokens: b.null_tokens,
                parse_failures: b.parse_failures,
            })
            .collect();
        TableFrame::new(self.schema, columns)
    }
}

/// Convenience for tests and generators: build from string rows.
pub fn table_from_rows<S: AsRef<str>>(schema: DatasetSchema, rows: &[Vec<S>]) -> Result<TableFrame, TableError> {
    let mut b = TableBuilder::new(schema)?;
    for row in rows {
        b.push_row(row)?;
    }
    b.finish()
}
