//! Severity × confidence ranking and assembly of the final diagnosis.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::aggregate::{ClusterRule, FindingCluster};
use super::consensus::{normalize_action, ConsensusFragment};
use super::hypotheses::ClusterHypothesis;
use crate::artifact::{Action, ConsensusSummary, Diagnosis, Finding, RankedFinding, Severity};

pub const NO_ISSUES: &str = "No significant issues detected";

pub fn rank_score(f: &Finding) -> f64 {
    f.severity.weight() * f.confidence
}

/// Score descending, then category order, then finding id.
pub fn compare_ranked(a: &RankedFinding, b: &RankedFinding) -> Ordering {
    b.rank_score
        .total_cmp(&a.rank_score)
        .then_with(|| a.finding.category.rank_order().cmp(&b.finding.category.rank_order()))
        .then_with(|| a.finding.finding_id.cmp(&b.finding.finding_id))
}

pub fn rank_findings(findings: impl IntoIterator<Item = Finding>) -> Vec<RankedFinding> {
    let mut ranked: Vec<RankedFinding> = findings
        .into_iter()
        .map(|finding| RankedFinding {
            rank_score: rank_score(&finding),
            finding,
        })
        .collect();
    ranked.sort_by(compare_ranked);
    ranked
}

/// Remediation for a canonical rule.
pub fn rule_action(rule: ClusterRule) -> Option<&'static str> {
    Some(match rule {
        ClusterRule::InvalidSplit => {
            "Halt model evaluation and recreate the train-test split using stratified sampling"
        }
        ClusterRule::ImbalanceDrivenUnderperformance => {
            "Rebalance training with class weights or resampling and track per-class recall"
        }
        ClusterRule::LeakageInflatedEvaluation => {
            "Remove samples shared between train and test and re-run the evaluation on the cleaned split"
        }
        ClusterRule::ConfigurationError => {
            "Align the checkpoint's output configuration with the label set and retrain"
        }
        ClusterRule::SharedColumns | ClusterRule::Singleton => return None,
    })
}

/// Remediation for a single finding, keyed by its check or rule id.
pub fn finding_action(f: &Finding) -> String {
    let key = f.finding_id.split_once(':').map_or(f.finding_id.as_str(), |(_, rest)| rest);
    let key = key.split(':').next().unwrap_or(key);
    let text = match key {
        "percent_of_nulls" | "nulls" => "Impute or drop columns with heavy missingness and check the upstream pipeline",
        "mixed_nulls" => "Normalize null tokens to a single representation",
        "mixed_data_types" => "Coerce mixed-type columns to one type at ingestion",
        "string_mismatch" => "Canonicalize category spellings",
        "special_characters" => "Clean special-character values or treat them as missing",
        "is_single_value" => "Drop constant columns",
        "class_imbalance" | "class-imbalance" => "Rebalance training with class weights or resampling",
        "data_duplicates" => "Deduplicate the training data",
        "conflicting_labels" => "Review and relabel samples whose identical features carry different labels",
        "outlier_sample_detection" => "Inspect outlier samples and clip, fix or remove them",
        "feature_label_correlation" => "Check highly predictive features for target leakage",
        "feature_feature_correlation" => "Remove or combine redundant correlated features",
        "datasets_size_comparison" => "Enlarge the test split",
        "new_label" => "Make sure every test label is represented in training",
        "new_category" => "Handle unseen categories explicitly or resample the split",
        "index_leakage" | "train_test_samples_mix" => "Remove samples shared between train and test",
        "label_drift" | "class-distribution-shift" => "Recreate the train-test split using stratified sampling",
        "feature_drift" | "multivariate_drift" => {
            "Investigate drifted features and retrain on data that matches deployment"
        }
        "train_test_performance" => "Reduce overfitting through regularization or more training data",
        "simple_model_comparison" | "single_dataset_performance" | "confusion_matrix_report" => {
            "Revisit model capacity and features; the model barely beats a trivial baseline"
        }
        "roc_report" => "Improve separability for low-AUC classes",
        "calibration_score" => "Calibrate predicted probabilities (e.g. temperature or isotonic scaling)",
        "weak_segments_performance" => "Collect more data or add features for weak segments",
        "prediction_drift" => "Check why predictions on test differ from train",
        "zero-parameters" => "Verify that the checkpoint was saved and loaded correctly",
        "config-mismatch" => "Align the checkpoint's output configuration with the label set",
        _ => return format!("Investigate: {}", f.description),
    };
    text.to_string()
}

fn best_position(cluster: &FindingCluster, positions: &BTreeMap<&str, usize>) -> usize {
    cluster
        .members
        .iter()
        .filter_map(|f| positions.get(f.finding_id.as_str()))
        .min()
        .copied()
        .unwrap_or(usize::MAX)
}

/// Combines clusters, their hypotheses and the consensus into a diagnosis.
pub fn rank_diagnosis(
    clusters: &[FindingCluster],
    hypotheses: &[ClusterHypothesis],
    consensus: Option<&ConsensusFragment>,
) -> Diagnosis {
    let ranked = rank_findings(clusters.iter().flat_map(|c| c.members.iter().cloned()));
    let positions: BTreeMap<&str, usize> = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| (r.finding.finding_id.as_str(), i))
        .collect();
    let by_cluster: BTreeMap<&str, &ClusterHypothesis> =
        hypotheses.iter().map(|h| (h.cluster_id.as_str(), h)).collect();

    let mut order: Vec<&FindingCluster> = clusters
        .iter()
        .filter(|c| c.max_severity().at_least(Severity::Low))
        .collect();
    order.sort_by_key(|c| (best_position(c, &positions), c.cluster_id.clone()));

    let mut actions: Vec<Action> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for c in order {
        let lead = c
            .members
            .iter()
            .min_by_key(|f| positions.get(f.finding_id.as_str()).copied().unwrap_or(usize::MAX));
        let Some(lead) = lead else { continue };
        let text = rule_action(c.rule).map_or_else(|| finding_action(lead), str::to_string);
        let key = normalize_action(&text);
        if seen.contains(&key) {
            if let Some(a) = actions.iter_mut().find(|a| normalize_action(&a.action) == key) {
                for f in &c.members {
                    if !a.linked_findings.contains(&f.finding_id) {
                        a.linked_findings.push(f.finding_id.clone());
                    }
                }
            }
            continue;
        }
        seen.push(key);
        let rationale = by_cluster
            .get(c.cluster_id.as_str())
            .map_or_else(|| lead.description.clone(), |h| h.hypothesis.statement.clone());
        actions.push(Action {
            action: text,
            rationale,
            linked_findings: c.members.iter().map(|f| f.finding_id.clone()).collect(),
        });
    }

    if let Some(fragment) = consensus {
        let top: Vec<String> = ranked.first().map(|r| r.finding.finding_id.clone()).into_iter().collect();
        for a in &fragment.actions {
            let key = normalize_action(&a.text);
            if key.is_empty() || seen.contains(&key) {
                continue;
            }
            seen.push(key);
            actions.push(Action {
                action: a.text.clone(),
                rationale: format!(
                    "Proposed by {} of {} reasoning samples (root cause: {})",
                    a.support, fragment.issued, fragment.root_cause_category
                ),
                linked_findings: top.clone(),
            });
        }
    }

    if actions.is_empty() {
        actions.push(Action {
            action: NO_ISSUES.to_string(),
            rationale: "No finding reached low severity or above".to_string(),
            linked_findings: Vec::new(),
        });
    }

    let notable: Vec<String> = ranked
        .iter()
        .filter(|r| r.finding.severity.at_least(Severity::Low))
        .map(|r| format!("[{}] {}", r.finding.severity, r.finding.description))
        .collect();
    let summary = if notable.is_empty() {
        format!("{NO_ISSUES}.")
    } else {
        notable.join("\n")
    };

    let consensus = consensus.map_or_else(ConsensusSummary::none, |f| ConsensusSummary {
        samples: f.parsed as u32,
        agreement: f.agreement,
        root_cause_category: Some(f.root_cause_category.clone()),
        confidence: f.confidence,
    });

    Diagnosis {
        ranked_findings: ranked,
        hypotheses: hypotheses.iter().map(|h| h.hypothesis.clone()).collect(),
        actions,
        summary,
        consensus,
        degraded: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{CheckCategory, SourceAgent};

    fn f(id: &str, sev: Severity, conf: f64, cat: CheckCategory) -> Finding {
        Finding {
            finding_id: id.into(),
            source_agent: SourceAgent::Checks,
            severity: sev,
            confidence: conf,
            category: cat,
            evidence: vec![],
            columns: vec![],
            description: id.into(),
        }
    }

    #[test]
    fn critical_beats_confident_high() {
        let r = rank_findings([
            f("b", Severity::High, 1.0, CheckCategory::DataIntegrity),
            f("a", Severity::Critical, 0.9, CheckCategory::DataIntegrity),
        ]);
        assert_eq!(r[0].finding.finding_id, "a");
        assert!((r[0].rank_score - 3.6).abs() < 1e-12);
    }

    #[test]
    fn ties_by_category_then_id() {
        let r = rank_findings([
            f("a", Severity::High, 0.5, CheckCategory::ModelEvaluation),
            f("c", Severity::High, 0.5, CheckCategory::TrainTestValidation),
            f("b", Severity::High, 0.5, CheckCategory::TrainTestValidation),
        ]);
        let ids: Vec<_> = r.iter().map(|x| x.finding.finding_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn empty_gives_no_issues_action() {
        let d = rank_diagnosis(&[], &[], None);
        assert_eq!(d.actions.len(), 1);
        assert_eq!(d.actions[0].action, NO_ISSUES);
        assert_eq!(d.consensus.samples, 0);
    }
}
