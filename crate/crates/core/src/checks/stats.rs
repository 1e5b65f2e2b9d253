//! Statistics used by the diagnostic checks.
//!
//! Nulls are dropped pairwise by the callers (or here, where inputs carry
//! `Option`s). Functions return [`StatError`] when their precondition does not
//! hold; checks translate that into a `skipped` result rather than a failure.

use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatError {
    /// Not enough usable data for the statistic to be defined.
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("degenerate margin: contingency row or column sums to zero")]
    DegenerateMargin,
}

fn insufficient(msg: impl Into<String>) -> StatError {
    StatError::Insufficient(msg.into())
}

/// Pearson χ² for an r×c table of counts: Σ (O−E)²/E with E = rowsum·colsum/n.
pub fn chi_square(table: &[Vec<u64>]) -> Result<f64, StatError> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || table.iter().any(|r| r.len() != cols) {
        return Err(insufficient("empty or ragged contingency table"));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let n: f64 = row_sums.iter().sum();
    if n == 0.0 {
        return Err(insufficient("no observations"));
    }
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(StatError::DegenerateMargin);
    }
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / n;
            let diff = obs as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    Ok(chi2)
}

/// Cramér's V from a dense table (uncorrected).
pub fn cramers_v_from_table(table: &[Vec<u64>]) -> Result<f64, StatError> {
    let chi2 = chi_square(table)?;
    let r = table.len();
    let c = table[0].len();
    let k = r.min(c);
    if k < 2 {
        return Err(insufficient("need at least two categories on each side"));
    }
    let n: u64 = table.iter().flatten().sum();
    Ok((chi2 / (n as f64 * (k - 1) as f64)).sqrt().clamp(0.0, 1.0))
}

/// Uncorrected Cramér's V between two categorical vectors.
///
/// Rows where either side is null are dropped. Uses the sparse identity
/// χ² = n·(Σ O²/(R·C) − 1), so only observed cells are visited.
pub fn cramers_v<A, B>(a: &[Option<A>], b: &[Option<B>]) -> Result<f64, StatError>
where
    A: Hash + Ord + Copy,
    B: Hash + Ord + Copy,
{
    if a.len() != b.len() {
        return Err(insufficient("vectors differ in length"));
    }
    let mut cells: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    let mut n = 0u64;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            *cells.entry((*x, *y)).or_default() += 1;
            *rows.entry(*x).or_default() += 1;
            *cols.entry(*y).or_default() += 1;
            n += 1;
        }
    }
    let k = rows.len().min(cols.len());
    if k < 2 {
        return Err(insufficient("need at least two categories on each side"));
    }
    // summation order is fixed so results are bit-identical across processes
    let mut cells: Vec<((A, B), u64)> = cells.into_iter().collect();
    cells.sort_unstable_by_key(|p| p.0);
    let mut acc = 0.0;
    for ((x, y), obs) in &cells {
        let o = *obs as f64;
        acc += o * o / (rows[x] as f64 * cols[y] as f64);
    }
    let chi2 = (n as f64 * (acc - 1.0)).max(0.0);
    Ok((chi2 / (n as f64 * (k - 1) as f64)).sqrt().clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov distance, computed exactly by a merged walk
/// over both sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatError> {
    if a.is_empty() || b.is_empty() {
        return Err(insufficient("empty sample"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Correlation ratio η of a numeric variable against a grouping.
pub fn correlation_ratio<G: Hash + Ord + Copy>(values: &[Option<f64>], groups: &[Option<G>]) -> Result<f64, StatError> {
    if values.len() != groups.len() {
        return Err(insufficient("vectors differ in length"));
    }
    let mut by_group: HashMap<G, (f64, u64)> = HashMap::new();
    let mut pairs = Vec::with_capacity(values.len());
    for (v, g) in values.iter().zip(groups) {
        if let (Some(v), Some(g)) = (v, g) {
            let e = by_group.entry(*g).or_default();
            e.0 += v;
            e.1 += 1;
            pairs.push(*v);
        }
    }
    if by_group.len() < 2 {
        return Err(insufficient("need at least two non-empty groups"));
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().sum::<f64>() / n;
    let total: f64 = pairs.iter().map(|v| (v - mean).powi(2)).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut groups_sorted: Vec<(G, (f64, u64))> = by_group.into_iter().collect();
    groups_sorted.sort_unstable_by_key(|p| p.0);
    let between: f64 = groups_sorted
        .iter()
        .map(|(_, (sum, cnt))| {
            let m = sum / *cnt as f64;
            *cnt as f64 * (m - mean).powi(2)
        })
        .sum();
    Ok((between / total).sqrt().clamp(0.0, 1.0))
}

/// Sample Pearson correlation after pairwise null removal.
pub fn pearson(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64, StatError> {
    if a.len() != b.len() {
        return Err(insufficient("vectors differ in length"));
    }
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return Err(insufficient("fewer than two complete pairs"));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(insufficient("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolated quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Consistency constant making the MAD estimate σ for normal data.
pub const MAD_SCALE: f64 = 1.4826;

/// Robust z-scores |x − median| / (1.4826·MAD) for one column; nulls score 0.
/// When MAD is zero, cells equal to the median score 0 and all others `cap`.
pub fn robust_z_scores(values: &[Option<f64>], cap: f64) -> Vec<f64> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return vec![0.0; values.len()];
    }
    present.sort_by(f64::total_cmp);
    let median = median_of_sorted(&present);
    let mut deviations: Vec<f64> = present.iter().map(|x| (x - median).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let mad = median_of_sorted(&deviations);
    values
        .iter()
        .map(|v| match v {
            None => 0.0,
            Some(x) if mad == 0.0 => {
                if *x == median {
                    0.0
                } else {
                    cap
                }
            }
            Some(x) => (x - median).abs() / (MAD_SCALE * mad),
        })
        .collect()
}

/// Per-row outlier score: the maximum robust z-score over the given columns.
pub fn robust_outlier_scores(columns: &[&[Option<f64>]], cap: f64) -> Result<Vec<f64>, StatError> {
    let Some(first) = columns.first() else {
        return Err(insufficient("no numeric columns"));
    };
    let mut scores = vec![0.0f64; first.len()];
    for col in columns {
        for (s, z) in scores.iter_mut().zip(robust_z_scores(col, cap)) {
            *s = s.max(z);
        }
    }
    Ok(scores)
}

/// ROC AUC via the Mann–Whitney rank-sum with midranks for ties.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64, StatError> {
    if scores.len() != labels.len() {
        return Err(insufficient("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(insufficient("need both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // ranks are 1-based; the tie group spans ranks start+1 ..= end+1
        let midrank = (start + end) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[start..=end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok(((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q)).clamp(0.0, 1.0))
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Expected calibration error over `bins` equal-width confidence bins.
///
/// Confidence is the max-class probability; a row is correct when its argmax
/// equals the true class index.
pub fn expected_calibration_error(probabilities: &[Vec<f64>], true_labels: &[usize], bins: usize) -> Result<f64, StatError> {
    if bins < 2 {
        return Err(insufficient("need at least two bins"));
    }
    if probabilities.is_empty() {
        return Err(insufficient("no predictions"));
    }
    if probabilities.len() != true_labels.len() {
        return Err(insufficient("probabilities and labels differ in length"));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut correct = vec![0usize; bins];
    for (row, &truth) in probabilities.iter().zip(true_labels) {
        let pred = argmax(row);
        let conf = row[pred];
        let b = ((conf * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += conf;
        if pred == truth {
            correct[b] += 1;
        }
    }
    let n = probabilities.len() as f64;
    let mut ece = 0.0;
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let nb = count[b] as f64;
        ece += (nb / n) * (correct[b] as f64 / nb - conf_sum[b] / nb).abs();
    }
    Ok(ece.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// Sorted union of observed labels.
    pub labels: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }
}

pub fn confusion_matrix<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> ConfusionMatrix {
    let mut labels: Vec<String> = truth
        .iter()
        .chain(predicted)
        .map(|s| s.as_ref().to_string())
        .collect();
    labels.sort();
    labels.dedup();
    let pos: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in truth.iter().zip(predicted) {
        counts[pos[t.as_ref()]][pos[p.as_ref()]] += 1;
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = (0..k)
        .map(|j| ratio(counts[j][j], (0..k).map(|i| counts[i][j]).sum()))
        .collect();
    let recall = (0..k).map(|i| ratio(counts[i][i], counts[i].iter().sum())).collect();
    ConfusionMatrix {
        labels,
        counts,
        precision,
        recall,
    }
}
