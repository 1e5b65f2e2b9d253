//! Multivariate drift via a domain classifier.
//!
//! Rows are labelled by origin (train = 0, test = 1) and a shallow Gini tree is
//! fit on a stratified 70% sample. The holdout AUC of its leaf probabilities
//! measures how separable the splits are: `drift = max(0, 2·AUC − 1)`.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checks::stats::{auc_roc, StatError};
use crate::table::{ColumnData, TableFrame};

pub const MIN_ROWS: usize = 20;
const HOLDOUT_FRACTION: f64 = 0.3;
/// Categorical splits consider this many most frequent categories at a node;
/// the rest are pooled.
const TOP_CATEGORIES: usize = 10;
const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct DriftTreeConfig {
    pub max_depth: usize,
    pub sample_size: usize,
    pub min_leaf_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub drift_score: f64,
    pub auc: f64,
    /// Split features ranked by total Gini gain (normalised by fit rows).
    pub feature_gains: Vec<(String, f64)>,
}

enum Feature {
    Numeric(Vec<f64>),
    /// Codes index a shared dictionary; `n_codes - 1` is the null category.
    Categorical { codes: Vec<u32>, n_codes: usize },
}

#[derive(Debug, Clone)]
enum Rule {
    LessEq(f64),
    InSet(Vec<bool>),
}

#[derive(Debug)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        rule: Rule,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct Split {
    feature: usize,
    rule: Rule,
    gain: f64,
}

pub fn domain_classifier_drift(train: &TableFrame, test: &TableFrame, cfg: &DriftTreeConfig) -> Result<DriftReport, StatError> {
    if train.row_count + test.row_count < MIN_ROWS {
        return Err(StatError::Insufficient(format!(
            "{} rows in total, need at least {MIN_ROWS}",
            train.row_count + test.row_count
        )));
    }
    if train.row_count == 0 || test.row_count == 0 {
        return Err(StatError::Insufficient("both splits must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train_rows = sample_rows(train.row_count, cfg.sample_size, &mut rng);
    let test_rows = sample_rows(test.row_count, cfg.sample_size, &mut rng);

    let (names, features) = encode_features(train, test, &train_rows, &test_rows);
    if features.is_empty() {
        return Err(StatError::Insufficient("no usable features".into()));
    }
    let n_train = train_rows.len();
    let origin: Vec<bool> = (0..n_train + test_rows.len()).map(|i| i >= n_train).collect();

    // stratified split over combined row positions
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for range in [0..n_train, n_train..origin.len()] {
        let mut rows: Vec<usize> = range.collect();
        rows.shuffle(&mut rng);
        let n_hold = ((rows.len() as f64 * HOLDOUT_FRACTION).round() as usize).max(1);
        holdout.extend_from_slice(&rows[..n_hold]);
        fit.extend_from_slice(&rows[n_hold..]);
    }

    let min_leaf = ((cfg.min_leaf_fraction * fit.len() as f64).ceil() as usize).max(5);
    let mut gains = vec![0.0; features.len()];
    let mut grower = Grower {
        features: &features,
        origin: &origin,
        min_leaf,
        max_depth: cfg.max_depth,
        gains: &mut gains,
    };
    let tree = grower.grow(&mut fit.clone(), 0);

    let scores: Vec<f64> = holdout.iter().map(|&r| predict(&tree, &features, r)).collect();
    let labels: Vec<bool> = holdout.iter().map(|&r| origin[r]).collect();
    let auc = auc_roc(&scores, &labels)?;

    let total = fit.len().max(1) as f64;
    let mut feature_gains: Vec<(String, f64)> = names
        .into_iter()
        .zip(gains)
        .filter(|(_, g)| *g > 0.0)
        .map(|(n, g)| (n, g / total))
        .collect();
    feature_gains.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Ok(DriftReport {
        drift_score: (2.0 * auc - 1.0).max(0.0),
        auc,
        feature_gains,
    })
}

fn sample_rows(n: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rows = index::sample(rng, n, cap).into_vec();
    rows.sort_unstable();
    rows
}

/// Features shared by both splits, stacked train-then-test. Text and
/// identifier columns are not used.
fn encode_features(train: &TableFrame, test: &TableFrame, tr: &[usize], te: &[usize]) -> (Vec<String>, Vec<Feature>) {
    let mut names = Vec::new();
    let mut features = Vec::new();
    for (pos, spec) in train.schema.feature_columns() {
        let (a, b) = (&train.columns[pos], &test.columns[pos]);
        match (&a.data, &b.data) {
            (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                let present = tr.iter().map(|&r| x[r]).chain(te.iter().map(|&r| y[r])).flatten();
                let Some(min) = present.reduce(f64::min) else { continue };
                let fill = min - 1.0;
                let values = tr
                    .iter()
                    .map(|&r| x[r])
                    .chain(te.iter().map(|&r| y[r]))
                    .map(|v| v.unwrap_or(fill))
                    .collect();
                names.push(spec.name.clone());
                features.push(Feature::Numeric(values));
            }
            (ColumnData::Interned { .. }, ColumnData::Interned { .. })
                if spec.kind == crate::artifact::ColumnKind::Categorical =>
            {
                let mut dict: HashMap<&str, u32> = HashMap::new();
                let mut raw = Vec::with_capacity(tr.len() + te.len());
                for (col, rows) in [(a, tr), (b, te)] {
                    for &r in rows {
                        raw.push(col.string_at(r).map(|s| {
                            let next = dict.len() as u32;
                            *dict.entry(s).or_insert(next)
                        }));
                    }
                }
                let null_code = dict.len() as u32;
                names.push(spec.name.clone());
                features.push(Feature::Categorical {
                    codes: raw.into_iter().map(|c| c.unwrap_or(null_code)).collect(),
                    n_codes: null_code as usize + 1,
                });
            }
            _ => {}
        }
    }
    (names, features)
}

/// Unnormalised Gini impurity n·(1 − p² − q²) = 2·pos·neg/n.
fn impurity(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    2.0 * pos as f64 * (n - pos) as f64 / n as f64
}

struct Grower<'a> {
    features: &'a [Feature],
    origin: &'a [bool],
    min_leaf: usize,
    max_depth: usize,
    gains: &'a mut [f64],
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> Node {
        let pos = rows.iter().filter(|&&r| self.origin[r]).count();
        let leaf = Node::Leaf(if rows.is_empty() { 0.5 } else { pos as f64 / rows.len() as f64 });
        if depth >= self.max_depth || pos == 0 || pos == rows.len() || rows.len() < 2 * self.min_leaf {
            return leaf;
        }
        let parent = impurity(rows.len(), pos);
        let mut best: Option<Split> = None;
        for (f, feature) in self.features.iter().enumerate() {
            let candidate = match feature {
                Feature::Numeric(values) => self.best_numeric(f, values, rows, pos, parent),
                Feature::Categorical { codes, n_codes } => self.best_categorical(f, codes, *n_codes, rows, pos, parent),
            };
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best.filter(|s| s.gain > MIN_GAIN) else {
            return leaf;
        };
        self.gains[split.feature] += split.gain;
        let feature = &self.features[split.feature];
        let mid = partition(rows, |r| goes_left(feature, &split.rule, r));
        let (l, r) = rows.split_at_mut(mid);
        let left = Box::new(self.grow(l, depth + 1));
        let right = Box::new(self.grow(r, depth + 1));
        Node::Split {
            feature: split.feature,
            rule: split.rule,
            left,
            right,
        }
    }

    fn best_numeric(&self, f: usize, values: &[f64], rows: &[usize], pos: usize, parent: f64) -> Option<Split> {
        let mut pts: Vec<(f64, bool)> = rows.iter().map(|&r| (values[r], self.origin[r])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len();
        let mut best: Option<Split> = None;
        let mut left_pos = 0;
        for i in 0..n - 1 {
            left_pos += usize::from(pts[i].1);
            if pts[i].0 == pts[i + 1].0 {
                continue;
            }
            let nl = i + 1;
            if nl < self.min_leaf || n - nl < self.min_leaf {
                continue;
            }
            let gain = parent - impurity(nl, left_pos) - impurity(n - nl, pos - left_pos);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: f,
                    rule: Rule::LessEq((pts[i].0 + pts[i + 1].0) / 2.0),
                    gain,
                });
            }
        }
        best
    }

    fn best_categorical(&self, f: usize, codes: &[u32], n_codes: usize, rows: &[usize], pos: usize, parent: f64) -> Option<Split> {
        let mut counts = vec![(0usize, 0usize); n_codes];
        for &r in rows {
            let c = &mut counts[codes[r] as usize];
            c.0 += 1;
            c.1 += usize::from(self.origin[r]);
        }
        let mut present: Vec<usize> = (0..n_codes).filter(|&c| counts[c].0 > 0).collect();
        present.sort_by(|&a, &b| counts[b].0.cmp(&counts[a].0).then(a.cmp(&b)));
        let (top, rest) = present.split_at(present.len().min(TOP_CATEGORIES));

        // groups: each top category alone, plus one pooled group for the rest
        let mut groups: Vec<(Vec<usize>, usize, usize)> =
            top.iter().map(|&c| (vec![c], counts[c].0, counts[c].1)).collect();
        if !rest.is_empty() {
            let n: usize = rest.iter().map(|&c| counts[c].0).sum();
            let p: usize = rest.iter().map(|&c| counts[c].1).sum();
            groups.push((rest.to_vec(), n, p));
        }
        if groups.len() < 2 {
            return None;
        }
        // for a binary target the best subset split is a prefix in this order
        groups.sort_by(|a, b| {
            let pa = a.2 as f64 / a.1 as f64;
            let pb = b.2 as f64 / b.1 as f64;
            pa.total_cmp(&pb).then(a.0[0].cmp(&b.0[0]))
        });
        let n = rows.len();
        let mut best: Option<Split> = None;
        let (mut nl, mut pl) = (0, 0);
        for k in 0..groups.len() - 1 {
            nl += groups[k].1;
            pl += groups[k].2;
            if nl < self.min_leaf || n - nl < self.min_leaf {
                continue;
            }
            let gain = parent - impurity(nl, pl) - impurity(n - nl, pos - pl);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut set = vec![false; n_codes];
                for g in &groups[..=k] {
                    for &c in &g.0 {
                        set[c] = true;
                    }
                }
                best = Some(Split {
                    feature: f,
                    rule: Rule::InSet(set),
                    gain,
                });
            }
        }
        best
    }
}

fn goes_left(feature: &Feature, rule: &Rule, row: usize) -> bool {
    match (feature, rule) {
        (Feature::Numeric(v), Rule::LessEq(t)) => v[row] <= *t,
        (Feature::Categorical { codes, .. }, Rule::InSet(set)) => set[codes[row] as usize],
        _ => unreachable!("rule kind always matches its feature"),
    }
}

/// Stable in-place partition; returns the number of rows sent left.
fn partition(rows: &mut [usize], mut left: impl FnMut(usize) -> bool) -> usize {
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&x| left(x));
    let mid = l.len();
    rows[..mid].copy_from_slice(&l);
    rows[mid..].copy_from_slice(&r);
    mid
}

fn predict(node: &Node, features: &[Feature], row: usize) -> f64 {
    match node {
        Node::Leaf(p) => *p,
        Node::Split {
            feature,
            rule,
            left,
            right,
        } => {
            if goes_left(&features[*feature], rule, row) {
                predict(left, features, row)
            } else {
                predict(right, features, row)
            }
        }
    }
}
