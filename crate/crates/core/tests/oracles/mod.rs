//! Brute-force reference implementations of the check statistics and a
//! seeded driver comparing them with the library over random instances.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use mlfix_core::checks::stats::{auc_roc, cramers_v, expected_calibration_error, ks_statistic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const V_TOL: f64 = 1e-9;
pub const AUC_TOL: f64 = 1e-12;
pub const ECE_TOL: f64 = 1e-12;

/// Dense contingency table, expected counts, Σ(O−E)²/E, then V.
pub fn oracle_cramers_v(a: &[u32], b: &[u32]) -> Option<f64> {
    let rows: Vec<u32> = a.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let cols: Vec<u32> = b.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if rows.len() < 2 || cols.len() < 2 {
        return None;
    }
    let mut table = vec![vec![0.0f64; cols.len()]; rows.len()];
    for (x, y) in a.iter().zip(b) {
        let i = rows.iter().position(|r| r == x).unwrap();
        let j = cols.iter().position(|c| c == y).unwrap();
        table[i][j] += 1.0;
    }
    let n = a.len() as f64;
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..rows.len() {
        for j in 0..cols.len() {
            let e = row_sums[i] * col_sums[j] / n;
            chi2 += (table[i][j] - e).powi(2) / e;
        }
    }
    let k = rows.len().min(cols.len()) as f64;
    Some((chi2 / (n * (k - 1.0))).sqrt())
}

/// Supremum of |F_a − F_b| over every sample point, counting directly.
pub fn oracle_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for &t in a.iter().chain(b) {
        let fa = a.iter().filter(|&&x| x <= t).count() as f64 / a.len() as f64;
        let fb = b.iter().filter(|&&x| x <= t).count() as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn oracle_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut concordant = 0.0;
    for p in &pos {
        for q in &neg {
            if p > q {
                concordant += 1.0;
            } else if p == q {
                concordant += 0.5;
            }
        }
    }
    Some(concordant / (pos.len() * neg.len()) as f64)
}

/// Equal-width bins by interval membership; the last bin is closed.
pub fn oracle_ece(probs: &[Vec<f64>], truth: &[usize], bins: usize) -> f64 {
    let n = probs.len() as f64;
    let mut ece = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let mut members = Vec::new();
        for (row, &t) in probs.iter().zip(truth) {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            let conf = row[best];
            let inside = conf >= lo && (conf < hi || (b == bins - 1 && conf <= hi));
            if inside {
                members.push((conf, best == t));
            }
        }
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|(_, ok)| *ok).count() as f64 / m;
        let conf = members.iter().map(|(c, _)| c).sum::<f64>() / m;
        ece += m / n * (acc - conf).abs();
    }
    ece
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub v_max_err: f64,
    pub ks_mismatches: usize,
    pub auc_max_err: f64,
    pub ece_max_err: f64,
    pub elapsed: Duration,
}

impl OracleReport {
    pub fn all_within_tolerance(&self) -> bool {
        self.v_max_err <= V_TOL && self.ks_mismatches == 0 && self.auc_max_err <= AUC_TOL && self.ece_max_err <= ECE_TOL
    }
}

/// Runs `instances` random small cases per statistic.
pub fn run_oracles(instances: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        instances,
        ..OracleReport::default()
    };
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(4..60);
        let ka = rng.random_range(2..6);
        let kb = rng.random_range(2..6);
        let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<u32> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let Some(expected) = oracle_cramers_v(&a, &b) else { continue };
        let oa: Vec<Option<u32>> = a.iter().copied().map(Some).collect();
        let ob: Vec<Option<u32>> = b.iter().copied().map(Some).collect();
        let got = cramers_v(&oa, &ob).expect("defined when oracle is");
        report.v_max_err = report.v_max_err.max((got - expected).abs());
        done += 1;
    }
    for _ in 0..instances {
        // small integer grids force ties
        let grid = rng.random_range(2..20);
        let a: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..grid) as f64 / 2.0).collect();
        let b: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..grid) as f64 / 2.0).collect();
        if ks_statistic(&a, &b).unwrap() != oracle_ks(&a, &b) {
            report.ks_mismatches += 1;
        }
    }
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(2..50);
        let grid = rng.random_range(2..30);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..grid) as f64 / grid as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let Some(expected) = oracle_auc(&scores, &labels) else { continue };
        let got = auc_roc(&scores, &labels).unwrap();
        report.auc_max_err = report.auc_max_err.max((got - expected).abs());
        done += 1;
    }
    for _ in 0..instances {
        let n = rng.random_range(1..60);
        let classes = rng.random_range(2..5);
        let bins = rng.random_range(2..16);
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let got = expected_calibration_error(&probs, &truth, bins).unwrap();
        report.ece_max_err = report.ece_max_err.max((got - oracle_ece(&probs, &truth, bins)).abs());
    }
    report.elapsed = start.elapsed();
    report
}
