//! Cross-artifact correlation of analyzer findings into clusters.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::analyzers::CONFIG_MISMATCH_ID;
use crate::artifact::{CheckCategory, Evidence, Finding, Severity, SourceAgent, LABEL_REF};
use crate::checks::fmt4;

/// Canonical correlation rules, applied in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterRule {
    InvalidSplit,
    ImbalanceDrivenUnderperformance,
    LeakageInflatedEvaluation,
    ConfigurationError,
    SharedColumns,
    Singleton,
}

impl ClusterRule {
    pub const CANONICAL: [ClusterRule; 4] = [
        ClusterRule::InvalidSplit,
        ClusterRule::ImbalanceDrivenUnderperformance,
        ClusterRule::LeakageInflatedEvaluation,
        ClusterRule::ConfigurationError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterRule::InvalidSplit => "invalid-split",
            ClusterRule::ImbalanceDrivenUnderperformance => "imbalance-driven-underperformance",
            ClusterRule::LeakageInflatedEvaluation => "leakage-inflated-evaluation",
            ClusterRule::ConfigurationError => "configuration-error",
            ClusterRule::SharedColumns => "shared-columns",
            ClusterRule::Singleton => "singleton",
        }
    }

    pub fn is_canonical(self) -> bool {
        Self::CANONICAL.contains(&self)
    }

    fn category(self) -> CheckCategory {
        match self {
            ClusterRule::InvalidSplit | ClusterRule::LeakageInflatedEvaluation => CheckCategory::TrainTestValidation,
            _ => CheckCategory::ModelEvaluation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindingCluster {
    pub cluster_id: String,
    pub rule: ClusterRule,
    /// Canonical clusters start with the synthesized reasoner finding.
    pub members: Vec<Finding>,
    pub narrative: String,
}

impl FindingCluster {
    pub fn correlation_rule_id(&self) -> &'static str {
        self.rule.as_str()
    }

    pub fn max_severity(&self) -> Severity {
        max_severity(&self.members)
    }

    /// Check ids cited by the members, sorted and deduplicated.
    pub fn check_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.members.iter().flat_map(|f| &f.evidence).map(|e| e.check_id.as_str()).collect();
        ids.into_iter().map(str::to_string).collect()
    }

    pub fn evidence(&self) -> Vec<Evidence> {
        union_evidence(&self.members)
    }
}

fn max_severity(findings: &[Finding]) -> Severity {
    findings
        .iter()
        .map(|f| f.severity)
        .min()
        .unwrap_or(Severity::Info)
}

fn union_evidence(findings: &[Finding]) -> Vec<Evidence> {
    let mut seen = BTreeMap::new();
    for e in findings.iter().flat_map(|f| &f.evidence) {
        seen.entry((e.check_id.clone(), e.metric.clone())).or_insert(e.value);
    }
    seen.into_iter()
        .map(|((check_id, metric), value)| Evidence { check_id, metric, value })
        .collect()
}

/// Whether `f` is about `check_id`, either as the check's own finding or by
/// citing it.
fn about(f: &Finding, check_id: &str) -> bool {
    f.finding_id.strip_prefix("checks:") == Some(check_id) || f.cites(check_id)
}

fn is_fail_finding(f: &Finding, check_id: &str) -> bool {
    f.source_agent == SourceAgent::Checks
        && f.finding_id.strip_prefix("checks:") == Some(check_id)
        && f.severity.at_least(Severity::Medium)
}

fn evidence_value(findings: &[&Finding], check_id: &str, metric: &str) -> Option<f64> {
    findings
        .iter()
        .flat_map(|f| &f.evidence)
        .find(|e| e.check_id == check_id && e.metric == metric)
        .map(|e| e.value)
}

struct RuleMatch {
    rule: ClusterRule,
    members: Vec<usize>,
}

fn match_rule(rule: ClusterRule, findings: &[Finding], free: &[bool]) -> Option<RuleMatch> {
    let avail = |i: &usize| free[*i];
    let idx = |pred: &dyn Fn(&Finding) -> bool| -> Vec<usize> {
        (0..findings.len()).filter(avail).filter(|&i| pred(&findings[i])).collect()
    };
    let members = match rule {
        ClusterRule::InvalidSplit => {
            if idx(&|f| is_fail_finding(f, "label_drift")).is_empty() || idx(&|f| is_fail_finding(f, "new_label")).is_empty()
            {
                return None;
            }
            idx(&|f| {
                about(f, "label_drift") || about(f, "new_label") || f.finding_id == "dataset:class-distribution-shift"
            })
        }
        ClusterRule::ImbalanceDrivenUnderperformance => {
            let imbalance = idx(&|f| f.finding_id == "dataset:class-imbalance" || about(f, "class_imbalance"));
            let weak = idx(&|f| {
                is_fail_finding(f, "weak_segments_performance") && f.columns.iter().any(|c| c == LABEL_REF)
            });
            if imbalance.is_empty() || weak.is_empty() {
                return None;
            }
            imbalance.into_iter().chain(weak).collect()
        }
        ClusterRule::LeakageInflatedEvaluation => {
            let leak = idx(&|f| about(f, "train_test_samples_mix") || about(f, "index_leakage"));
            let gap = idx(&|f| about(f, "train_test_performance"));
            if leak.is_empty() || gap.is_empty() {
                return None;
            }
            leak.into_iter().chain(gap).collect()
        }
        ClusterRule::ConfigurationError => {
            let mismatch = idx(&|f| f.finding_id == CONFIG_MISMATCH_ID);
            let eval = idx(&|f| {
                f.source_agent == SourceAgent::Checks
                    && f.category == CheckCategory::ModelEvaluation
                    && f.severity.at_least(Severity::Medium)
            });
            if mismatch.is_empty() || eval.is_empty() {
                return None;
            }
            mismatch.into_iter().chain(eval).collect()
        }
        ClusterRule::SharedColumns | ClusterRule::Singleton => return None,
    };
    let members: BTreeSet<usize> = members.into_iter().collect();
    Some(RuleMatch {
        rule,
        members: members.into_iter().collect(),
    })
}

fn headline(rule: ClusterRule, severity: Severity, members: &[&Finding]) -> String {
    match rule {
        ClusterRule::InvalidSplit => {
            let lead = if severity == Severity::Critical {
                "Critical data partitioning failure"
            } else {
                "Data partitioning failure"
            };
            let mut parts = Vec::new();
            if let Some(v) = evidence_value(members, "label_drift", "cramers_v") {
                parts.push(format!("label distributions differ sharply between train and test (Cramer's V {})", fmt4(v)));
            } else if let Some(v) = evidence_value(members, "label_drift", "ks_statistic") {
                parts.push(format!("label distributions differ sharply between train and test (KS {})", fmt4(v)));
            }
            if let Some(r) = evidence_value(members, "new_label", "new_label_ratio") {
                parts.push(format!("{}% of test labels never appear in training", fmt4(r * 100.0)));
            }
            if parts.is_empty() {
                format!("{lead} causing an unrepresentative test set")
            } else {
                format!("{lead} causing an unrepresentative test set: {}", parts.join("; "))
            }
        }
        ClusterRule::ImbalanceDrivenUnderperformance => {
            "Class imbalance is driving poor performance on minority classes".to_string()
        }
        ClusterRule::LeakageInflatedEvaluation => {
            "Train/test leakage is inflating evaluation results".to_string()
        }
        ClusterRule::ConfigurationError => {
            "Model configuration does not match the data it is evaluated on".to_string()
        }
        ClusterRule::SharedColumns | ClusterRule::Singleton => String::new(),
    }
}

/// Noisy-OR of member confidences: the chance at least one is right.
fn noisy_or(findings: &[&Finding]) -> f64 {
    let mut confs: Vec<f64> = findings.iter().map(|f| f.confidence).collect();
    confs.sort_by(f64::total_cmp);
    1.0 - confs.iter().fold(1.0, |acc, c| acc * (1.0 - c))
}

fn reasoner_finding(rule: ClusterRule, members: &[&Finding]) -> Finding {
    let severity = members.iter().map(|f| f.severity).min().unwrap_or(Severity::Info);
    let owned: Vec<Finding> = members.iter().map(|f| (*f).clone()).collect();
    let columns: BTreeSet<String> = members.iter().flat_map(|f| f.columns.iter().cloned()).collect();
    Finding {
        finding_id: format!("reasoner:{}", rule.as_str()),
        source_agent: SourceAgent::Reasoner,
        severity,
        confidence: noisy_or(members),
        category: rule.category(),
        evidence: union_evidence(&owned),
        columns: columns.into_iter().collect(),
        description: headline(rule, severity, members),
    }
}

fn narrative(rule: ClusterRule, members: &[Finding]) -> String {
    let lines: Vec<String> = members.iter().map(|f| format!("- [{}] {}", f.severity, f.description)).collect();
    format!("{}\n{}", rule.as_str(), lines.join("\n"))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let root = self.find(p);
        self.0[i] = root;
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // The smaller index stays root so output order is stable.
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Groups findings: canonical rules first, then clusters of findings sharing
/// a column, then singletons. Input order does not matter.
pub fn aggregate_findings(findings: &[Finding]) -> Vec<FindingCluster> {
    let mut sorted: Vec<Finding> = findings.to_vec();
    sorted.sort_by(|a, b| a.finding_id.cmp(&b.finding_id));
    let mut free = vec![true; sorted.len()];
    let mut clusters = Vec::new();

    for rule in ClusterRule::CANONICAL {
        let Some(m) = match_rule(rule, &sorted, &free) else { continue };
        for &i in &m.members {
            free[i] = false;
        }
        let refs: Vec<&Finding> = m.members.iter().map(|&i| &sorted[i]).collect();
        let mut members = vec![reasoner_finding(m.rule, &refs)];
        members.extend(refs.into_iter().cloned());
        clusters.push(FindingCluster {
            cluster_id: format!("cluster:{}", m.rule.as_str()),
            rule: m.rule,
            narrative: narrative(m.rule, &members),
            members,
        });
    }

    let rest: Vec<usize> = (0..sorted.len()).filter(|&i| free[i]).collect();
    let mut uf = UnionFind((0..sorted.len()).collect());
    let mut by_column: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in &rest {
        if sorted[i].severity == Severity::Info {
            continue;
        }
        for c in &sorted[i].columns {
            match by_column.get(c.as_str()) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_column.insert(c.as_str(), i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &rest {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    for (_, group) in groups {
        let members: Vec<Finding> = group.iter().map(|&i| sorted[i].clone()).collect();
        let (rule, cluster_id) = if members.len() > 1 {
            (ClusterRule::SharedColumns, format!("cluster:{}", members[0].finding_id))
        } else {
            (ClusterRule::Singleton, format!("single:{}", members[0].finding_id))
        };
        clusters.push(FindingCluster {
            cluster_id,
            rule,
            narrative: narrative(rule, &members),
            members,
        });
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn finding(id: &str, sev: Severity, check: Option<(&str, &str, f64)>, cols: &[&str]) -> Finding {
        let (agent, category) = match id.split(':').next() {
            Some("checks") => (SourceAgent::Checks, CheckCategory::TrainTestValidation),
            Some("dataset") => (SourceAgent::Dataset, CheckCategory::DataIntegrity),
            _ => (SourceAgent::Checkpoint, CheckCategory::ModelEvaluation),
        };
        Finding {
            finding_id: id.into(),
            source_agent: agent,
            severity: sev,
            confidence: 0.95,
            category,
            evidence: check
                .map(|(c, m, v)| Evidence {
                    check_id: c.into(),
                    metric: m.into(),
                    value: v,
                })
                .into_iter()
                .collect(),
            columns: cols.iter().map(|c| c.to_string()).collect(),
            description: id.into(),
        }
    }

    #[test]
    fn label_drift_and_new_label_form_invalid_split() {
        let fs = vec![
            finding("checks:new_label", Severity::Critical, Some(("new_label", "new_label_ratio", 0.75)), &["@label"]),
            finding("checks:label_drift", Severity::Critical, Some(("label_drift", "cramers_v", 0.92)), &["@label"]),
        ];
        let clusters = aggregate_findings(&fs);
        assert_eq!(clusters.len(), 1);
        let c = &clusters[0];
        assert_eq!(c.rule, ClusterRule::InvalidSplit);
        assert_eq!(c.members.len(), 3);
        assert_eq!(c.members[0].finding_id, "reasoner:invalid-split");
        assert_eq!(c.members[0].severity, Severity::Critical);
        assert!(c.members[0].description.starts_with("Critical data partitioning failure"));
        assert!(c.members[0].description.contains("0.92"));
        assert!(c.members[0].description.contains("75%"));
    }

    #[test]
    fn disjoint_columns_are_singletons() {
        let fs = vec![
            finding("checks:a", Severity::Medium, None, &["x"]),
            finding("checks:b", Severity::Medium, None, &["y"]),
        ];
        let clusters = aggregate_findings(&fs);
        assert_eq!(clusters.len(), 2);
        assert!(clusters.iter().all(|c| c.rule == ClusterRule::Singleton));
    }

    #[test]
    fn shared_columns_merge_transitively() {
        let fs = vec![
            finding("checks:a", Severity::Medium, None, &["x"]),
            finding("checks:b", Severity::Medium, None, &["x", "y"]),
            finding("checks:c", Severity::Low, None, &["y"]),
        ];
        let clusters = aggregate_findings(&fs);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].cluster_id, "cluster:checks:a");
    }

    #[test]
    fn empty_input() {
        assert!(aggregate_findings(&[]).is_empty());
    }

    #[test]
    fn every_finding_lands_in_one_cluster() {
        let fs = vec![
            finding("checks:label_drift", Severity::High, Some(("label_drift", "cramers_v", 0.3)), &["@label"]),
            finding("checks:new_label", Severity::High, Some(("new_label", "new_label_ratio", 0.2)), &["@label"]),
            finding("dataset:class-imbalance", Severity::High, None, &["@label"]),
            finding("checkpoint:absent", Severity::Info, None, &[]),
        ];
        let clusters = aggregate_findings(&fs);
        let ids: Vec<&str> = clusters
            .iter()
            .flat_map(|c| &c.members)
            .filter(|f| f.source_agent != SourceAgent::Reasoner)
            .map(|f| f.finding_id.as_str())
            .collect();
        let unique: BTreeSet<&str> = ids.iter().copied().collect();
        assert_eq!(ids.len(), 4);
        assert_eq!(unique.len(), 4);
    }
}
