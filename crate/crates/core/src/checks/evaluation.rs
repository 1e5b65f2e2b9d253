//! Model-evaluation checks over prediction sidecars.

use std::collections::HashMap;

use super::stats::{auc_roc, confusion_matrix, cramers_v, expected_calibration_error, ks_statistic, quantile_sorted};
use super::{distinct_count, fmt4, require_label, skip, CheckContext, Comparison, Outcome, Skip};
use crate::artifact::{ColumnKind, DatasetRef, PredictionSet, Task, LABEL_REF};
use crate::table::{ColumnData, TableFrame};

/// Labelled rows of one split paired with their predictions.
struct Scored<'a> {
    table: &'a TableFrame,
    preds: &'a PredictionSet,
    /// Rows whose true label is present.
    rows: Vec<usize>,
    truth: Vec<String>,
    predicted: Vec<String>,
}

impl Scored<'_> {
    fn correct(&self) -> Vec<bool> {
        self.truth.iter().zip(&self.predicted).map(|(t, p)| t == p).collect()
    }

    fn accuracy(&self) -> f64 {
        let c = self.correct();
        c.iter().filter(|&&x| x).count() as f64 / c.len() as f64
    }
}

fn scored<'a>(ctx: &CheckContext<'a>, which: DatasetRef) -> Result<Scored<'a>, Skip> {
    let (Some(table), Some(preds)) = (ctx.table(which), ctx.predictions(which)) else {
        return skip(format!("no predictions for the {} split", split_name(which)));
    };
    require_label(table)?;
    let labels = table.label_strings().unwrap_or_default();
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (r, l) in labels.into_iter().enumerate() {
        if let Some(l) = l {
            rows.push(r);
            truth.push(l);
            predicted.push(preds.predicted_labels[r].to_label_string());
        }
    }
    if rows.is_empty() {
        return skip(format!("no labelled rows in the {} split", split_name(which)));
    }
    Ok(Scored {
        table,
        preds,
        rows,
        truth,
        predicted,
    })
}

fn split_name(which: DatasetRef) -> &'static str {
    match which {
        DatasetRef::Train => "train",
        DatasetRef::Test => "test",
    }
}

/// The split evaluated by single-split checks: test when it has predictions.
fn primary_split(ctx: &CheckContext<'_>) -> DatasetRef {
    if ctx.test_predictions.is_some() {
        DatasetRef::Test
    } else {
        DatasetRef::Train
    }
}

fn r_squared(s: &Scored<'_>) -> Result<(f64, f64), Skip> {
    let mut pairs = Vec::with_capacity(s.rows.len());
    let label = s.table.label().and_then(|c| c.numeric());
    let Some(label) = label else {
        return skip("regression label is not numeric");
    };
    for &r in &s.rows {
        if let (Some(y), Some(p)) = (label[r], s.preds.predicted_labels[r].as_f64()) {
            pairs.push((y, p));
        }
    }
    if pairs.len() < 2 {
        return skip("fewer than two numeric predictions");
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let ss_tot: f64 = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|p| (p.0 - p.1).powi(2)).sum();
    if ss_tot == 0.0 {
        return skip("label has zero variance");
    }
    Ok((1.0 - ss_res / ss_tot, (ss_res / n).sqrt()))
}

fn performance(s: &Scored<'_>, task: Task) -> Result<(&'static str, f64), Skip> {
    Ok(match task {
        Task::Classification => ("accuracy", s.accuracy()),
        Task::Regression => ("r2", r_squared(s)?.0),
    })
}

pub(crate) fn single_dataset_performance(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let which = primary_split(ctx);
    let s = scored(ctx, which)?;
    let task = ctx.train.schema.task;
    let out = match task {
        Task::Classification => {
            let cm = confusion_matrix(&s.truth, &s.predicted);
            let acc = cm.accuracy();
            Outcome::new(format!("{} accuracy {}", split_name(which), fmt4(acc)))
                .metric("accuracy", acc)
                .details(cm.labels.iter().cloned().zip(cm.recall.iter().copied()))
        }
        Task::Regression => {
            let (r2, rmse) = r_squared(&s)?;
            Outcome::new(format!("{} R² {}", split_name(which), fmt4(r2)))
                .metric("r2", r2)
                .metric("rmse", rmse)
        }
    };
    Ok(out.metric("rows", s.rows.len() as f64))
}

pub(crate) fn train_test_performance(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let train = scored(ctx, DatasetRef::Train)?;
    let test = scored(ctx, DatasetRef::Test)?;
    let task = ctx.train.schema.task;
    let (name, a) = performance(&train, task)?;
    let (_, b) = performance(&test, task)?;
    let gap = a - b;
    Ok(Outcome::new(format!(
        "train {name} {} vs test {}; gap {}",
        fmt4(a),
        fmt4(b),
        fmt4(gap)
    ))
    .metric("performance_gap", gap)
    .metric(&format!("train_{name}"), a)
    .metric(&format!("test_{name}"), b)
    .condition("performance_gap", Comparison::AtMost(ctx.config.max_performance_gap)))
}

fn classification_only(ctx: &CheckContext<'_>) -> Result<(), Skip> {
    if ctx.train.schema.task != Task::Classification {
        return skip("not a classification task");
    }
    Ok(())
}

pub(crate) fn confusion_matrix_report(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    classification_only(ctx)?;
    let which = primary_split(ctx);
    let s = scored(ctx, which)?;
    let cm = confusion_matrix(&s.truth, &s.predicted);
    let mut details = Vec::new();
    for (i, t) in cm.labels.iter().enumerate() {
        for (j, p) in cm.labels.iter().enumerate() {
            if cm.counts[i][j] > 0 {
                details.push((format!("{t}|{p}"), cm.counts[i][j] as f64));
            }
        }
    }
    let macro_recall = cm.recall.iter().sum::<f64>() / cm.labels.len() as f64;
    Ok(Outcome::new(format!(
        "{} classes on the {} split, accuracy {}",
        cm.labels.len(),
        split_name(which),
        fmt4(cm.accuracy())
    ))
    .metric("accuracy", cm.accuracy())
    .metric("macro_recall", macro_recall)
    .metric("classes", cm.labels.len() as f64)
    .details(details))
}

fn with_probabilities<'a>(s: &Scored<'a>) -> Result<(&'a [Vec<f64>], &'a [String]), Skip> {
    match (&s.preds.probabilities, &s.preds.class_order) {
        (Some(p), Some(order)) => Ok((p, order)),
        _ => skip("predictions carry no probabilities"),
    }
}

pub(crate) fn roc_report(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    classification_only(ctx)?;
    let s = scored(ctx, primary_split(ctx))?;
    let (probs, order) = with_probabilities(&s)?;
    let mut aucs = Vec::new();
    for (j, class) in order.iter().enumerate() {
        let scores: Vec<f64> = s.rows.iter().map(|&r| probs[r][j]).collect();
        let labels: Vec<bool> = s.truth.iter().map(|t| t == class).collect();
        if let Ok(a) = auc_roc(&scores, &labels) {
            aucs.push((class.clone(), a));
        }
    }
    if aucs.is_empty() {
        return skip("no class has both positive and negative rows");
    }
    let min = aucs.iter().map(|a| a.1).fold(1.0, f64::min);
    Ok(Outcome::new(format!(
        "one-vs-rest AUC ranges from {} over {} class(es)",
        fmt4(min),
        aucs.len()
    ))
    .metric("min_auc", min)
    .condition("min_auc", Comparison::AtLeast(ctx.config.min_auc))
    .details(aucs))
}

pub(crate) fn calibration_score(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    classification_only(ctx)?;
    let s = scored(ctx, primary_split(ctx))?;
    let (probs, order) = with_probabilities(&s)?;
    let position: HashMap<&str, usize> = order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let rows: Vec<Vec<f64>> = s.rows.iter().map(|&r| probs[r].clone()).collect();
    // labels outside class_order can never be predicted correctly
    let truth: Vec<usize> = s
        .truth
        .iter()
        .map(|t| position.get(t.as_str()).copied().unwrap_or(usize::MAX))
        .collect();
    let ece = expected_calibration_error(&rows, &truth, ctx.config.ece_bins)?;
    Ok(Outcome::new(format!(
        "expected calibration error {} over {} bins",
        fmt4(ece),
        ctx.config.ece_bins
    ))
    .metric("ece", ece)
    .condition("ece", Comparison::AtMost(ctx.config.max_ece)))
}

pub(crate) fn simple_model_comparison(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    classification_only(ctx)?;
    let s = scored(ctx, primary_split(ctx))?;
    // the baseline always predicts the most frequent train class
    let mut counts: HashMap<String, usize> = HashMap::new();
    for l in ctx.train.label_strings().unwrap_or_default().into_iter().flatten() {
        *counts.entry(l).or_default() += 1;
    }
    let Some(majority) = counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|m| m.0)
    else {
        return skip("train split has no labels");
    };
    let baseline = s.truth.iter().filter(|t| **t == majority).count() as f64 / s.truth.len() as f64;
    if baseline == 0.0 {
        return skip("majority-class baseline scores zero");
    }
    let acc = s.accuracy();
    let lift = acc / baseline;
    Ok(Outcome::new(format!(
        "model accuracy {} vs majority-class baseline {}",
        fmt4(acc),
        fmt4(baseline)
    ))
    .metric("accuracy_lift", lift)
    .metric("model_accuracy", acc)
    .metric("baseline_accuracy", baseline)
    .condition("accuracy_lift", Comparison::AtLeast(ctx.config.min_baseline_lift)))
}

/// Segment name and membership per scored row (`None` = not in any segment
/// of that family, e.g. a null cell).
fn segment_families(s: &Scored<'_>, max_categories: usize) -> Vec<(String, Vec<Option<String>>)> {
    let t = s.table;
    let mut families = Vec::new();
    for col in t.features() {
        match (&col.data, col.kind) {
            (ColumnData::Numeric(v), ColumnKind::Numeric | ColumnKind::Datetime) => {
                let mut present: Vec<f64> = s.rows.iter().filter_map(|&r| v[r]).collect();
                if present.len() < 4 {
                    continue;
                }
                present.sort_by(f64::total_cmp);
                let cuts = [0.25, 0.5, 0.75].map(|q| quantile_sorted(&present, q));
                let names = ["Q1", "Q2", "Q3", "Q4"];
                let member = s
                    .rows
                    .iter()
                    .map(|&r| {
                        v[r].map(|x| {
                            let bin = cuts.iter().take_while(|&&c| x > c).count();
                            format!("{}:{}", col.name, names[bin])
                        })
                    })
                    .collect();
                families.push((col.name.clone(), member));
            }
            (ColumnData::Interned { .. }, ColumnKind::Categorical) if distinct_count(col) <= max_categories => {
                let member = s
                    .rows
                    .iter()
                    .map(|&r| col.string_at(r).map(|v| format!("{}={v}", col.name)))
                    .collect();
                families.push((col.name.clone(), member));
            }
            _ => {}
        }
    }
    families.push((
        LABEL_REF.to_string(),
        s.truth.iter().map(|l| Some(format!("{LABEL_REF}={l}"))).collect(),
    ));
    families
}

pub(crate) fn weak_segments_performance(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    classification_only(ctx)?;
    let s = scored(ctx, primary_split(ctx))?;
    let cfg = ctx.config;
    let correct = s.correct();
    let n = correct.len();
    let global = s.accuracy();
    let min_support = (cfg.weak_segment_min_support * n as f64).ceil().max(1.0) as usize;
    let mut weak = Vec::new();
    let mut flagged = Vec::new();
    let mut scanned = 0usize;
    for (column, member) in segment_families(&s, cfg.max_association_categories) {
        let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
        for (m, ok) in member.iter().zip(&correct) {
            if let Some(m) = m {
                let e = tally.entry(m.as_str()).or_default();
                e.0 += 1;
                e.1 += usize::from(*ok);
            }
        }
        for (name, (count, hits)) in tally {
            if count < min_support {
                continue;
            }
            scanned += 1;
            let acc = hits as f64 / count as f64;
            if acc < global - cfg.weak_segment_accuracy_drop {
                weak.push((name.to_string(), acc));
                if !flagged.contains(&column) {
                    flagged.push(column.clone());
                }
            }
        }
    }
    flagged.sort();
    Ok(Outcome::new(format!(
        "{} of {scanned} one-dimensional segments trail global accuracy {} by more than {} \
         (single-feature segments only)",
        weak.len(),
        fmt4(global),
        fmt4(cfg.weak_segment_accuracy_drop)
    ))
    .metric("weak_segment_count", weak.len() as f64)
    .metric("global_accuracy", global)
    .metric(
        "min_segment_accuracy",
        weak.iter().map(|w| w.1).fold(global, f64::min),
    )
    .condition("weak_segment_count", Comparison::Equals(0.0))
    .details(weak)
    .flag(flagged))
}

pub(crate) fn prediction_drift(ctx: &CheckContext<'_>) -> Result<Outcome, Skip> {
    let (Some(a), Some(b)) = (ctx.train_predictions, ctx.test_predictions) else {
        return skip("needs predictions for both splits");
    };
    let (metric, value) = match ctx.train.schema.task {
        Task::Classification => {
            let mut dict: HashMap<String, u32> = HashMap::new();
            let mut labels = Vec::new();
            let mut origin = Vec::new();
            for (o, p) in [(0u8, a), (1u8, b)] {
                for l in &p.predicted_labels {
                    let next = dict.len() as u32;
                    labels.push(Some(*dict.entry(l.to_label_string()).or_insert(next)));
                    origin.push(Some(o));
                }
            }
            ("prediction_drift", cramers_v(&origin, &labels)?)
        }
        Task::Regression => {
            let xs: Vec<f64> = a.predicted_labels.iter().filter_map(|l| l.as_f64()).collect();
            let ys: Vec<f64> = b.predicted_labels.iter().filter_map(|l| l.as_f64()).collect();
            ("prediction_drift", ks_statistic(&xs, &ys)?)
        }
    };
    Ok(Outcome::new(format!("predicted-label shift between splits {}", fmt4(value)))
        .metric(metric, value)
        .condition(metric, Comparison::AtMost(ctx.config.prediction_drift_threshold)))
}
