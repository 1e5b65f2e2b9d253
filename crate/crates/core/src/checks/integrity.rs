//! Data-integrity checks. They look at the train split only.

use std::collections::{HashMap, HashSet};

use super::stats::{correlation_ratio, cramers_v, pearson, robust_z_scores};
use super::{category_keys, distinct_count, fmt4, require_label, skip, CheckContext, Comparison, Outcome, Skip};
use crate::artifact::{CheckStatus, ColumnKind, Task, LABEL_REF};
use crate::table::{CellKey, Column, ColumnData, TableFrame};

fn non_empty(table: &TableFrame) -> Result<(), Skip> {
    if table.row_count == 0 {
        return skip("dataset has no rows");
    }
    Ok(())
}

pub(crate) fn percent_of_nulls(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let limit = ctx.config.max_null_fraction;
    let fractions: Vec<(String, f64)> = t
        .columns
        .iter()
        .map(|c| (c.name.clone(), c.null_count() as f64 / t.row_count as f64))
        .collect();
    let worst = fractions.iter().map(|f| f.1).fold(0.0, f64::max);
    let flagged: Vec<String> = fractions.iter().filter(|f| f.1 > limit).map(|f| f.0.clone()).collect();
    Ok(Outcome::new(format!(
        "max null fraction {} ({} column(s) above {})",
        fmt4(worst),
        flagged.len(),
        fmt4(limit)
    ))
    .metric("max_null_fraction", worst)
    .condition("max_null_fraction", Comparison::AtMost(limit))
    .details(fractions.into_iter().filter(|f| f.1 > 0.0))
    .flag(flagged))
}

pub(crate) fn mixed_nulls(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let limit = ctx.config.max_distinct_null_tokens;
    let counts: Vec<(String, f64)> = t
        .columns
        .iter()
        .map(|c| (c.name.clone(), c.null_tokens.len() as f64))
        .collect();
    let worst = counts.iter().map(|c| c.1).fold(0.0, f64::max);
    let flagged: Vec<String> = counts.iter().filter(|c| c.1 > limit).map(|c| c.0.clone()).collect();
    Ok(Outcome::new(format!(
        "up to {worst} distinct null-like tokens in one column; {} column(s) mix them",
        flagged.len()
    ))
    .metric("max_distinct_null_tokens", worst)
    .condition("max_distinct_null_tokens", Comparison::AtMost(limit))
    .details(counts.into_iter().filter(|c| c.1 > 0.0))
    .flag(flagged))
}

/// Fraction of non-null cells whose type is the minority in the column:
/// unparseable cells in numeric columns, numeric-looking cells in
/// categorical columns.
fn minority_type_fraction(col: &Column) -> Option<f64> {
    let (minority, total) = match (&col.data, col.kind) {
        (ColumnData::Numeric(v), _) => {
            let present = v.iter().flatten().count();
            (col.parse_failures.min(present), present + col.parse_failures)
        }
        (ColumnData::Interned { codes, dictionary }, ColumnKind::Categorical) => {
            let numeric_code: Vec<bool> = dictionary.iter().map(|s| s.trim().parse::<f64>().is_ok()).collect();
            let present = codes.iter().flatten().count();
            let numeric = codes.iter().flatten().filter(|&&c| numeric_code[c as usize]).count();
            (numeric.min(present - numeric), present)
        }
        _ => return None,
    };
    (total > 0).then(|| minority as f64 / total as f64)
}

pub(crate) fn mixed_data_types(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let (lo, hi) = ctx.config.mixed_types_band;
    let fractions: Vec<(String, f64)> = t
        .columns
        .iter()
        .filter(|c| c.kind != ColumnKind::Identifier)
        .filter_map(|c| minority_type_fraction(c).map(|f| (c.name.clone(), f)))
        .collect();
    if fractions.is_empty() {
        return skip("no numeric or categorical columns with values");
    }
    let in_band = |f: f64| lo < f && f < hi;
    let flagged: Vec<String> = fractions.iter().filter(|f| in_band(f.1)).map(|f| f.0.clone()).collect();
    // report the worst offending column if any, otherwise the largest mix
    let metric = fractions
        .iter()
        .filter(|f| in_band(f.1))
        .map(|f| f.1)
        .reduce(f64::max)
        .unwrap_or_else(|| fractions.iter().map(|f| f.1).fold(0.0, f64::max));
    Ok(Outcome::new(format!("{} column(s) hold a small minority of cells of another type", flagged.len()))
        .metric("minority_type_fraction", metric)
        .condition("minority_type_fraction", Comparison::OutsideOpen(lo, hi))
        .details(fractions.into_iter().filter(|f| f.1 > 0.0))
        .flag(flagged))
}

/// Case-folded alphanumeric core of a string.
fn base_form(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

fn used_dictionary<'a>(codes: &[Option<u32>], dictionary: &'a [String]) -> Vec<&'a str> {
    let mut used = vec![false; dictionary.len()];
    for c in codes.iter().flatten() {
        used[*c as usize] = true;
    }
    dictionary
        .iter()
        .zip(used)
        .filter(|(_, u)| *u)
        .map(|(s, _)| s.as_str())
        .collect()
}

pub(crate) fn string_mismatch(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let mut per_column = Vec::new();
    for col in t.columns.iter().filter(|c| c.kind == ColumnKind::Categorical) {
        let Some((codes, dictionary)) = col.interned() else { continue };
        let mut variants: HashMap<String, usize> = HashMap::new();
        for value in used_dictionary(codes, dictionary) {
            let base = base_form(value);
            if !base.is_empty() {
                *variants.entry(base).or_default() += 1;
            }
        }
        let mismatched = variants.values().filter(|&&n| n >= 2).count();
        per_column.push((col.name.clone(), mismatched as f64));
    }
    if per_column.is_empty() {
        return skip("no categorical columns");
    }
    let total: f64 = per_column.iter().map(|c| c.1).sum();
    let flagged: Vec<String> = per_column.iter().filter(|c| c.1 > 0.0).map(|c| c.0.clone()).collect();
    Ok(Outcome::new(format!(
        "{total} base form(s) written in several variants across {} column(s)",
        flagged.len()
    ))
    .metric("mismatched_base_forms", total)
    .condition("mismatched_base_forms", Comparison::Equals(0.0))
    .details(per_column.into_iter().filter(|c| c.1 > 0.0))
    .flag(flagged))
}

pub(crate) fn special_characters(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let limit = ctx.config.max_special_character_fraction;
    let mut fractions = Vec::new();
    for col in t
        .columns
        .iter()
        .filter(|c| matches!(c.kind, ColumnKind::Categorical | ColumnKind::Text))
    {
        let Some((codes, dictionary)) = col.interned() else { continue };
        let special: Vec<bool> = dictionary
            .iter()
            .map(|s| !s.trim().is_empty() && !s.chars().any(char::is_alphanumeric))
            .collect();
        let present = codes.iter().flatten().count();
        if present == 0 {
            continue;
        }
        let n = codes.iter().flatten().filter(|&&c| special[c as usize]).count();
        fractions.push((col.name.clone(), n as f64 / present as f64));
    }
    if fractions.is_empty() {
        return skip("no categorical or text columns with values");
    }
    let worst = fractions.iter().map(|f| f.1).fold(0.0, f64::max);
    let flagged: Vec<String> = fractions.iter().filter(|f| f.1 > limit).map(|f| f.0.clone()).collect();
    Ok(Outcome::new(format!(
        "max fraction of purely special-character cells {}",
        fmt4(worst)
    ))
    .metric("max_special_character_fraction", worst)
    .condition("max_special_character_fraction", Comparison::AtMost(limit))
    .details(fractions.into_iter().filter(|f| f.1 > 0.0))
    .flag(flagged))
}

pub(crate) fn is_single_value(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let single: Vec<String> = t
        .features()
        .filter(|c| distinct_count(c) == 1)
        .map(|c| c.name.clone())
        .collect();
    Ok(Outcome::new(format!("{} feature(s) hold a single distinct value", single.len()))
        .metric("single_value_columns", single.len() as f64)
        .condition("single_value_columns", Comparison::Equals(0.0))
        .details(single.iter().map(|c| (c.clone(), 1.0)))
        .flag(single))
}

pub(crate) fn class_imbalance(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    if t.schema.task != Task::Classification {
        return skip("not a classification task");
    }
    require_label(t)?;
    let mut counts: HashMap<String, u64> = HashMap::new();
    for l in t.label_strings().unwrap_or_default().into_iter().flatten() {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return skip("fewer than two classes");
    }
    let total: u64 = counts.values().sum();
    let min = *counts.values().min().unwrap_or(&0);
    let max = *counts.values().max().unwrap_or(&1);
    let ratio = min as f64 / max as f64;
    Ok(Outcome::new(format!(
        "rarest/most frequent class ratio {} over {} classes",
        fmt4(ratio),
        counts.len()
    ))
    .metric("imbalance_ratio", ratio)
    .metric("class_count", counts.len() as f64)
    .condition("imbalance_ratio", Comparison::AtLeast(ctx.config.min_imbalance_ratio))
    .details(counts.into_iter().map(|(k, v)| (k, v as f64 / total as f64)))
    .flag([LABEL_REF.to_string()]))
}

/// Row keys over the given column positions.
fn row_keys<'a>(table: &'a TableFrame, positions: &[usize]) -> Vec<Vec<CellKey<'a>>> {
    (0..table.row_count)
        .map(|r| positions.iter().map(|&p| table.columns[p].cell_key(r)).collect())
        .collect()
}

/// Columns that identify a sample's content: everything except the index
/// and identifier columns.
pub(crate) fn content_positions(table: &TableFrame) -> Vec<usize> {
    let index = table.schema.index_column.as_deref();
    table
        .schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != ColumnKind::Identifier && Some(c.name.as_str()) != index)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn data_duplicates(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let positions = content_positions(t);
    let mut seen: HashSet<Vec<CellKey<'_>>> = HashSet::with_capacity(t.row_count);
    let mut duplicates = 0usize;
    for key in row_keys(t, &positions) {
        if !seen.insert(key) {
            duplicates += 1;
        }
    }
    let fraction = duplicates as f64 / t.row_count as f64;
    let mut out = Outcome::new(format!("{duplicates} row(s) repeat an earlier row ({})", fmt4(fraction)))
        .metric("duplicate_fraction", fraction)
        .metric("duplicate_count", duplicates as f64)
        .condition("duplicate_fraction", Comparison::AtMost(ctx.config.max_duplicate_fraction));
    if duplicates > 0 {
        out.pass_status = Some(CheckStatus::Warn);
    }
    Ok(out)
}

pub(crate) fn conflicting_labels(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let label = require_label(t)?;
    let features: Vec<usize> = t.schema.feature_columns().map(|(i, _)| i).collect();
    if features.is_empty() {
        return skip("no feature columns");
    }
    let mut groups: HashMap<Vec<CellKey<'_>>, (CellKey<'_>, bool, usize)> = HashMap::new();
    for (r, key) in row_keys(t, &features).into_iter().enumerate() {
        let l = label.cell_key(r);
        let entry = groups.entry(key).or_insert((l, false, 0));
        entry.2 += 1;
        if entry.0 != l {
            entry.1 = true;
        }
    }
    let conflicting: Vec<usize> = groups.values().filter(|g| g.1).map(|g| g.2).collect();
    let rows: usize = conflicting.iter().sum();
    Ok(Outcome::new(format!(
        "{} group(s) of identical features carry different labels ({rows} rows)",
        conflicting.len()
    ))
    .metric("conflicting_groups", conflicting.len() as f64)
    .metric("conflicting_row_fraction", rows as f64 / t.row_count as f64)
    .condition("conflicting_groups", Comparison::Equals(0.0))
    .flag([LABEL_REF.to_string()]))
}

pub(crate) fn outlier_sample_detection(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let cfg = ctx.config;
    let numeric: Vec<&Column> = t.features().filter(|c| c.kind == ColumnKind::Numeric).collect();
    if numeric.is_empty() {
        return skip("no numeric feature columns");
    }
    let mut row_score = vec![0.0f64; t.row_count];
    let mut per_column = Vec::new();
    for col in &numeric {
        let z = robust_z_scores(col.numeric().unwrap_or_default(), cfg.outlier_z_cap);
        let mut n = 0usize;
        for (s, zi) in row_score.iter_mut().zip(&z) {
            *s = s.max(*zi);
            if *zi > cfg.outlier_score_threshold {
                n += 1;
            }
        }
        per_column.push((col.name.clone(), n as f64 / t.row_count as f64));
    }
    let outliers = row_score.iter().filter(|&&s| s > cfg.outlier_score_threshold).count();
    let fraction = outliers as f64 / t.row_count as f64;
    let flagged: Vec<String> = per_column
        .iter()
        .filter(|c| c.1 > cfg.max_outlier_fraction)
        .map(|c| c.0.clone())
        .collect();
    Ok(Outcome::new(format!(
        "{outliers} row(s) with robust score above {}",
        fmt4(cfg.outlier_score_threshold)
    ))
    .metric("outlier_fraction", fraction)
    .metric("max_outlier_score", row_score.iter().copied().fold(0.0, f64::max))
    .condition("outlier_fraction", Comparison::AtMost(cfg.max_outlier_fraction))
    .details(per_column.into_iter().filter(|c| c.1 > 0.0))
    .flag(flagged))
}

/// How a column takes part in association measures.
enum Assoc<'a> {
    Numeric(&'a [Option<f64>]),
    Categorical(Vec<Option<u64>>),
}

fn assoc_view(col: &Column, max_categories: usize) -> Option<Assoc<'_>> {
    match col.kind {
        ColumnKind::Numeric | ColumnKind::Datetime => col.numeric().map(Assoc::Numeric),
        ColumnKind::Categorical if distinct_count(col) <= max_categories => Some(Assoc::Categorical(category_keys(col))),
        _ => None,
    }
}

/// Association in [0, 1] chosen by kind pair: |r|, η or Cramér's V.
fn association(a: &Assoc<'_>, b: &Assoc<'_>) -> Result<f64, super::StatError> {
    match (a, b) {
        (Assoc::Numeric(x), Assoc::Numeric(y)) => pearson(x, y).map(f64::abs),
        (Assoc::Numeric(x), Assoc::Categorical(g)) | (Assoc::Categorical(g), Assoc::Numeric(x)) => correlation_ratio(x, g),
        (Assoc::Categorical(x), Assoc::Categorical(y)) => cramers_v(x, y),
    }
}

pub(crate) fn feature_label_correlation(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let label = require_label(t)?;
    let cap = ctx.config.max_association_categories;
    // a classification label is a grouping even when its cells are numbers
    let label_view = match t.schema.task {
        Task::Classification => Assoc::Categorical(category_keys(label)),
        Task::Regression => match label.numeric() {
            Some(v) => Assoc::Numeric(v),
            None => return skip("regression label is not numeric"),
        },
    };
    let mut scores = Vec::new();
    for col in t.features() {
        let Some(view) = assoc_view(col, cap) else { continue };
        if let Ok(v) = association(&view, &label_view) {
            scores.push((col.name.clone(), v));
        }
    }
    if scores.is_empty() {
        return skip("no feature has a defined association with the label");
    }
    let limit = ctx.config.max_feature_label_correlation;
    let worst = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    let flagged: Vec<String> = scores.iter().filter(|s| s.1 > limit).map(|s| s.0.clone()).collect();
    Ok(Outcome::new(format!(
        "strongest feature-label association {} ({} feature(s) above {})",
        fmt4(worst),
        flagged.len(),
        fmt4(limit)
    ))
    .metric("max_feature_label_correlation", worst)
    .condition("max_feature_label_correlation", Comparison::AtMost(limit))
    .details(scores)
    .flag(flagged))
}

pub(crate) fn feature_feature_correlation(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let t = ctx.train;
    non_empty(t)?;
    let cap = ctx.config.max_association_categories;
    let views: Vec<(&str, Assoc<'_>)> = t
        .features()
        .filter_map(|c| assoc_view(c, cap).map(|v| (c.name.as_str(), v)))
        .collect();
    if views.len() < 2 {
        return skip("fewer than two comparable features");
    }
    let pairs: Vec<(usize, usize)> = (0..views.len())
        .flat_map(|i| (i + 1..views.len()).map(move |j| (i, j)))
        .collect();
    let limit = ctx.config.max_feature_feature_correlation;
    let measured: Vec<(usize, usize, f64)> = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .filter_map(|&(i, j)| association(&views[i].1, &views[j].1).ok().map(|v| (i, j, v)))
            .collect()
    };
    let max = measured.iter().map(|m| m.2).fold(0.0, f64::max);
    let strong: Vec<&(usize, usize, f64)> = measured.iter().filter(|m| m.2 > limit).collect();
    let mut flagged: Vec<String> = strong
        .iter()
        .flat_map(|m| [views[m.0].0.to_string(), views[m.1].0.to_string()])
        .collect();
    flagged.sort();
    flagged.dedup();
    let mut out = Outcome::new(format!(
        "{} feature pair(s) associated above {}",
        strong.len(),
        fmt4(limit)
    ))
    .metric("correlated_pairs", strong.len() as f64)
    .metric("max_pair_correlation", max)
    .condition("correlated_pairs", Comparison::Equals(0.0))
    .details(strong.iter().map(|m| (format!("{}|{}", views[m.0].0, views[m.1].0), m.2)))
    .flag(flagged);
    out.violation_status = Some(CheckStatus::Warn);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_forms_fold_case_and_punctuation() {
        assert_eq!(base_form(" New-York "), "newyork");
        assert_eq!(base_form("new york"), "newyork");
        assert_eq!(base_form("--"), "");
    }
}
