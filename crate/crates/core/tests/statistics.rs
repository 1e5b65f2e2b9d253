mod oracles;

use mlfix_core::checks::stats::{auc_roc, cramers_v, expected_calibration_error, ks_statistic};
use proptest::prelude::*;

#[test]
fn statistics_match_brute_force_oracles() {
    let report = oracles::run_oracles(1000, 20240101);
    assert!(report.v_max_err <= oracles::V_TOL, "V error {}", report.v_max_err);
    assert_eq!(report.ks_mismatches, 0);
    assert!(report.auc_max_err <= oracles::AUC_TOL, "AUC error {}", report.auc_max_err);
    assert!(report.ece_max_err <= oracles::ECE_TOL, "ECE error {}", report.ece_max_err);
    assert!(report.elapsed.as_secs_f64() < 10.0, "took {:?}", report.elapsed);
}

#[test]
fn hand_computed_values() {
    // 2x2 table [[10, 0], [0, 10]]: perfect association
    let a: Vec<Option<u8>> = (0..20).map(|i| Some(u8::from(i >= 10))).collect();
    assert!((cramers_v(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    // table [[3,1],[1,3]]: phi = (3·3 − 1·1) / sqrt(4·4·4·4) = 0.5
    let x = [0u8, 0, 0, 0, 1, 1, 1, 1].map(Some);
    let y = [0u8, 0, 0, 1, 1, 1, 1, 0].map(Some);
    assert!((cramers_v(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
    assert_eq!(auc_roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
}

fn categories(max: u8) -> impl Strategy<Value = Vec<(u8, u8)>> {
    prop::collection::vec((0..max, 0..max), 4..80)
}

proptest! {
    #[test]
    fn cramers_v_is_symmetric_and_bounded(pairs in categories(5)) {
        let a: Vec<Option<u8>> = pairs.iter().map(|p| Some(p.0)).collect();
        let b: Vec<Option<u8>> = pairs.iter().map(|p| Some(p.1)).collect();
        if let (Ok(ab), Ok(ba)) = (cramers_v(&a, &b), cramers_v(&b, &a)) {
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn cramers_v_ignores_category_names(pairs in categories(4), shift in 1u8..50) {
        let a: Vec<Option<u8>> = pairs.iter().map(|p| Some(p.0)).collect();
        let renamed: Vec<Option<u8>> = pairs.iter().map(|p| Some(200 - p.0.wrapping_mul(3).wrapping_add(shift))).collect();
        let b: Vec<Option<u8>> = pairs.iter().map(|p| Some(p.1)).collect();
        if let (Ok(x), Ok(y)) = (cramers_v(&a, &b), cramers_v(&renamed, &b)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_symmetric_bounded_and_monotone_invariant(
        a in prop::collection::vec(-100.0f64..100.0, 1..40),
        b in prop::collection::vec(-100.0f64..100.0, 1..40),
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        let f = |v: &[f64]| v.iter().map(|x| x.powi(3) + 7.0).collect::<Vec<_>>();
        prop_assert_eq!(d, ks_statistic(&f(&a), &f(&b)).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn auc_complements_under_negation(
        rows in prop::collection::vec((0u8..20, any::<bool>()), 2..60),
    ) {
        let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        if let Ok(auc) = auc_roc(&scores, &labels) {
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((auc + auc_roc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
            let mono: Vec<f64> = scores.iter().map(|s| (s / 3.0).exp()).collect();
            prop_assert!((auc - auc_roc(&mono, &labels).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ece_is_bounded(
        rows in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0, 0usize..2), 1..50),
        bins in 2usize..20,
    ) {
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0 / (r.0 + r.1), r.1 / (r.0 + r.1)]).collect();
        let truth: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let e = expected_calibration_error(&probs, &truth, bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }
}
