//! Train/test validation checks.

use std::collections::{HashMap, HashSet};

use super::drift_tree::{domain_classifier_drift, DriftTreeConfig};
use super::integrity::content_positions;
use super::stats::{cramers_v, ks_statistic};
use super::{distinct_count, fmt4, require_label, require_test, skip, top_k, CheckContext, Comparison, Outcome, Skip, StatError};
use crate::artifact::{ColumnKind, Task, LABEL_REF};
use crate::table::{CellKey, Column, TableFrame};

pub(crate) fn datasets_size_comparison(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    if ctx.train.row_count == 0 {
        return skip("train split has no rows");
    }
    let ratio = test.row_count as f64 / ctx.train.row_count as f64;
    Ok(Outcome::new(format!(
        "test/train size ratio {} ({} vs {} rows)",
        fmt4(ratio),
        test.row_count,
        ctx.train.row_count
    ))
    .metric("test_train_size_ratio", ratio)
    .metric("train_rows", ctx.train.row_count as f64)
    .metric("test_rows", test.row_count as f64)
    .condition("test_train_size_ratio", Comparison::AtLeast(ctx.config.min_test_train_size_ratio)))
}

fn label_set(table: &TableFrame) -> HashSet<String> {
    table.label_strings().unwrap_or_default().into_iter().flatten().collect()
}

pub(crate) fn new_label(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    if ctx.train.schema.task != Task::Classification {
        return skip("not a classification task");
    }
    require_label(ctx.train)?;
    let train_labels = label_set(ctx.train);
    let test_labels = label_set(test);
    if test_labels.is_empty() {
        return skip("test split has no labels");
    }
    let unseen = test_labels.iter().filter(|l| !train_labels.contains(*l)).count();
    let ratio = unseen as f64 / test_labels.len() as f64;
    Ok(Outcome::new(format!(
        "{unseen} of {} distinct test labels never occur in train",
        test_labels.len()
    ))
    .metric("new_label_ratio", ratio)
    .metric("new_label_count", unseen as f64)
    .condition("new_label_ratio", Comparison::Equals(0.0))
    .flag([LABEL_REF.to_string()]))
}

fn present_strings(col: &Column) -> HashSet<&str> {
    (0..col.len()).filter_map(|r| col.string_at(r)).collect()
}

pub(crate) fn new_category(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    if test.row_count == 0 {
        return skip("test split has no rows");
    }
    let mut fractions = Vec::new();
    for (pos, spec) in ctx.train.schema.feature_columns() {
        if spec.kind != ColumnKind::Categorical {
            continue;
        }
        let seen = present_strings(&ctx.train.columns[pos]);
        let col = &test.columns[pos];
        let unseen = (0..col.len())
            .filter_map(|r| col.string_at(r))
            .filter(|v| !seen.contains(v))
            .count();
        fractions.push((spec.name.clone(), unseen as f64 / test.row_count as f64));
    }
    if fractions.is_empty() {
        return skip("no categorical features");
    }
    let limit = ctx.config.max_new_category_fraction;
    let worst = fractions.iter().map(|f| f.1).fold(0.0, f64::max);
    let flagged: Vec<String> = fractions.iter().filter(|f| f.1 > limit).map(|f| f.0.clone()).collect();
    Ok(Outcome::new(format!(
        "up to {} of test rows carry a category unseen in train",
        fmt4(worst)
    ))
    .metric("max_new_category_fraction", worst)
    .condition("max_new_category_fraction", Comparison::AtMost(limit))
    .details(fractions.into_iter().filter(|f| f.1 > 0.0))
    .flag(flagged))
}

pub(crate) fn index_leakage(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    let (Some(train_idx), Some(test_idx)) = (ctx.train.index(), test.index()) else {
        return skip("schema declares no index column");
    };
    if test.row_count == 0 {
        return skip("test split has no rows");
    }
    let train_keys: HashSet<CellKey<'_>> = (0..train_idx.len())
        .map(|r| train_idx.cell_key(r))
        .filter(|k| *k != CellKey::Null)
        .collect();
    let overlap = (0..test_idx.len())
        .map(|r| test_idx.cell_key(r))
        .filter(|k| train_keys.contains(k))
        .count();
    let fraction = overlap as f64 / test.row_count as f64;
    Ok(Outcome::new(format!("{overlap} test row(s) reuse a train index value"))
        .metric("index_overlap_fraction", fraction)
        .metric("index_overlap_count", overlap as f64)
        .condition("index_overlap_fraction", Comparison::Equals(0.0))
        .flag([train_idx.name.clone()]))
}

pub(crate) fn train_test_samples_mix(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    if test.row_count == 0 {
        return skip("test split has no rows");
    }
    let positions = content_positions(ctx.train);
    fn key<'t>(t: &'t TableFrame, positions: &[usize], r: usize) -> Vec<CellKey<'t>> {
        positions.iter().map(|&p| t.columns[p].cell_key(r)).collect()
    }
    let train_rows: HashSet<Vec<CellKey<'_>>> = (0..ctx.train.row_count).map(|r| key(ctx.train, &positions, r)).collect();
    let mixed = (0..test.row_count)
        .filter(|&r| train_rows.contains(&key(test, &positions, r)))
        .count();
    let fraction = mixed as f64 / test.row_count as f64;
    Ok(Outcome::new(format!("{mixed} test row(s) also appear in train"))
        .metric("samples_mix_fraction", fraction)
        .metric("samples_mix_count", mixed as f64)
        .condition("samples_mix_fraction", Comparison::AtMost(ctx.config.max_samples_mix_fraction)))
}

/// Cramér's V between split origin and a column's values, comparing cells by
/// their string or numeric identity across both tables.
fn origin_association(train: &Column, test: &Column) -> Result<f64, StatError> {
    let mut dict: HashMap<CellKey<'_>, u32> = HashMap::new();
    let mut values = Vec::with_capacity(train.len() + test.len());
    let mut origin = Vec::with_capacity(train.len() + test.len());
    for (o, col) in [(0u8, train), (1u8, test)] {
        for r in 0..col.len() {
            let k = col.cell_key(r);
            values.push((k != CellKey::Null).then(|| {
                let next = dict.len() as u32;
                *dict.entry(k).or_insert(next)
            }));
            origin.push(Some(o));
        }
    }
    cramers_v(&origin, &values)
}

pub(crate) fn label_drift(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    let train_label = require_label(ctx.train)?;
    let test_label = require_label(test)?;
    let threshold = ctx.config.label_drift_threshold;
    let (metric, value) = match ctx.train.schema.task {
        Task::Classification => ("cramers_v", origin_association(train_label, test_label)?),
        Task::Regression => (
            "ks_statistic",
            ks_statistic(&train_label.present_values(), &test_label.present_values())?,
        ),
    };
    Ok(Outcome::new(format!("label distribution shift between splits: {metric} {}", fmt4(value)))
        .metric(metric, value)
        .condition(metric, Comparison::AtMost(threshold))
        .flag([LABEL_REF.to_string()]))
}

pub(crate) fn feature_drift(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    let cap = ctx.config.max_association_categories;
    let mut drifts = Vec::new();
    for (pos, spec) in ctx.train.schema.feature_columns() {
        let (a, b) = (&ctx.train.columns[pos], &test.columns[pos]);
        let d = match spec.kind {
            ColumnKind::Numeric | ColumnKind::Datetime => ks_statistic(&a.present_values(), &b.present_values()),
            ColumnKind::Categorical if distinct_count(a) <= cap && distinct_count(b) <= cap => origin_association(a, b),
            _ => continue,
        };
        if let Ok(d) = d {
            drifts.push((spec.name.clone(), d));
        }
    }
    if drifts.is_empty() {
        return skip("no feature with a defined drift measure");
    }
    let limit = ctx.config.feature_drift_threshold;
    let worst = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let drifted: Vec<String> = top_k(drifts.iter().filter(|d| d.1 > limit).cloned().collect(), usize::MAX)
        .into_iter()
        .map(|d| d.0)
        .collect();
    Ok(Outcome::new(format!(
        "{} feature(s) drift above {}; largest {}",
        drifted.len(),
        fmt4(limit),
        fmt4(worst)
    ))
    .metric("max_feature_drift", worst)
    .metric("drifted_features", drifted.len() as f64)
    .condition("max_feature_drift", Comparison::AtMost(limit))
    .details(top_k(drifts, ctx.config.feature_drift_top_k))
    .flag(drifted))
}

pub(crate) fn multivariate_drift(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let test = require_test(ctx)?;
    let cfg = ctx.config;
    let report = domain_classifier_drift(
        ctx.train,
        test,
        &DriftTreeConfig {
            max_depth: cfg.drift_tree_depth,
            sample_size: cfg.drift_sample_size,
            min_leaf_fraction: cfg.drift_min_leaf_fraction,
            seed: cfg.random_seed,
        },
    )?;
    let top = top_k(report.feature_gains.clone(), cfg.feature_drift_top_k);
    Ok(Outcome::new(format!(
        "domain classifier separates the splits with AUC {}",
        fmt4(report.auc)
    ))
    .metric("drift_score", report.drift_score)
    .metric("domain_classifier_auc", report.auc)
    .condition("drift_score", Comparison::AtMost(cfg.multivariate_drift_threshold))
    .flag(top.iter().map(|t| t.0.clone()))
    .details(top))
}
