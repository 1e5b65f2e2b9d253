//! Per-split dataset statistics.

use std::collections::{BTreeMap, HashSet};

use crate::artifact::{
    CategoryFrequency, ColumnKind, ColumnStatistics, DatasetStatistics, NumericSummary, Task,
};
use crate::checks::stats::{median_of_sorted, quantile_sorted};
use crate::table::{Column, ColumnData, TableFrame};

/// Most frequent categories reported per categorical column.
pub const TOP_K_CATEGORIES: usize = 10;
/// Categories seen fewer times than this are never named in statistics.
pub const MIN_REPORTED_CATEGORY_COUNT: u64 = 2;

pub fn compute_dataset_statistics(table: &TableFrame) -> DatasetStatistics {
    let n = table.row_count;
    let per_column = table.columns.iter().map(|c| column_statistics(c, n)).collect();
    let class_distribution = match (table.schema.task, table.label()) {
        (Task::Classification, Some(_)) => {
            let mut dist = BTreeMap::new();
            for label in table.label_strings().unwrap_or_default().into_iter().flatten() {
                *dist.entry(label).or_insert(0u64) += 1;
            }
            Some(dist)
        }
        _ => None,
    };
    DatasetStatistics {
        sample_count: n as u64,
        per_column,
        class_distribution,
    }
}

fn column_statistics(col: &Column, n: usize) -> ColumnStatistics {
    let null_fraction = if n == 0 { 0.0 } else { col.null_count() as f64 / n as f64 };
    let (distinct_count, numeric_summary, top_categories) = match &col.data {
        ColumnData::Numeric(values) => {
            let mut present: Vec<f64> = values.iter().flatten().copied().collect();
            present.sort_by(f64::total_cmp);
            let distinct = {
                let mut d = present.clone();
                d.dedup();
                d.len() as u64
            };
            (distinct, numeric_summary(&present), None)
        }
        ColumnData::Interned { codes, dictionary } => {
            let mut counts = vec![0u64; dictionary.len()];
            for c in codes.iter().flatten() {
                counts[*c as usize] += 1;
            }
            let distinct = counts.iter().filter(|&&c| c > 0).count() as u64;
            let top = (col.kind == ColumnKind::Categorical && n > 0).then(|| {
                let mut cats: Vec<(usize, u64)> = counts
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, c)| c >= MIN_REPORTED_CATEGORY_COUNT)
                    .collect();
                cats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| dictionary[a.0].cmp(&dictionary[b.0])));
                cats.truncate(TOP_K_CATEGORIES);
                cats.into_iter()
                    .map(|(code, count)| CategoryFrequency {
                        value: dictionary[code].clone(),
                        count,
                        frequency: count as f64 / n as f64,
                    })
                    .collect()
            });
            (distinct, None, top)
        }
    };
    ColumnStatistics {
        name: col.name.clone(),
        kind: col.kind,
        null_fraction,
        distinct_count,
        numeric_summary,
        top_categories,
    }
}

fn numeric_summary(sorted: &[f64]) -> Option<NumericSummary> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(NumericSummary {
        min: sorted[0],
        max: sorted[n - 1],
        // rounding can push the mean a hair outside [min, max] for constant data
        mean: mean.clamp(sorted[0], sorted[n - 1]),
        std,
        q1: quantile_sorted(sorted, 0.25),
        median: median_of_sorted(sorted),
        q3: quantile_sorted(sorted, 0.75),
    })
}

/// Distinct non-null labels of a table, as strings.
pub fn label_set(table: &TableFrame) -> HashSet<String> {
    table.label_strings().unwrap_or_default().into_iter().flatten().collect()
}
