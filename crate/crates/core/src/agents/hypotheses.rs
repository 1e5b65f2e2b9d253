//! Knowledge-grounded root-cause hypotheses, one per non-trivial cluster.

use std::collections::BTreeSet;

use serde::Deserialize;
use serde_json::Value;

use super::aggregate::{ClusterRule, FindingCluster};
use super::llm::{complete_json, structured_request};
use super::prompts::HYPOTHESIS;
use super::provider::LlmProvider;
use crate::artifact::codec::canonical_json;
use crate::artifact::{Hypothesis, Severity};
use crate::kb::{KbIndex, SearchHit, WebSearch};

/// Plausibility ceiling for hypotheses no document supports.
pub const UNGROUNDED_CAP: f64 = 0.5;

/// A hypothesis with the retrieval it was grounded in.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHypothesis {
    pub cluster_id: String,
    pub query: String,
    pub retrieved: Vec<String>,
    pub hypothesis: Hypothesis,
    /// Produced by the template fallback rather than the provider.
    pub fallback: bool,
}

#[derive(Debug, Deserialize)]
struct ProposedHypothesis {
    statement: String,
    plausibility: f64,
    #[serde(default)]
    citations: Vec<String>,
}

/// Template statement and preferred document for each canonical rule.
pub fn rule_template(rule: ClusterRule) -> Option<(&'static str, &'static str)> {
    Some(match rule {
        ClusterRule::InvalidSplit => (
            "The train-test split was not stratified by label, so the test set does not represent the label distribution the model was trained on",
            "stratified-splitting",
        ),
        ClusterRule::ImbalanceDrivenUnderperformance => (
            "Minority classes are too rare in training for the model to learn them, which shows up as weak performance on those classes",
            "class-imbalance",
        ),
        ClusterRule::LeakageInflatedEvaluation => (
            "Samples shared between train and test make the evaluation overly optimistic, so the reported performance will not hold in deployment",
            "train-test-leakage",
        ),
        ClusterRule::ConfigurationError => (
            "The checkpoint was configured for a different label space than the data, so its outputs cannot line up with the labels",
            "model-configuration-consistency",
        ),
        ClusterRule::SharedColumns | ClusterRule::Singleton => return None,
    })
}

/// Retrieval query: the narrative followed by the cited check ids.
pub fn retrieval_query(cluster: &FindingCluster) -> String {
    let ids = cluster.check_ids();
    if ids.is_empty() {
        cluster.narrative.clone()
    } else {
        format!("{}\n{}", cluster.narrative, ids.join(" "))
    }
}

fn fallback(cluster: &FindingCluster, hits: &[SearchHit]) -> (String, Vec<String>, f64) {
    let retrieved: Vec<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
    let (statement, citation, plausibility) = match rule_template(cluster.rule) {
        Some((statement, doc)) => {
            let cite = if retrieved.contains(&doc) { Some(doc) } else { retrieved.first().copied() };
            (statement.to_string(), cite, 0.8)
        }
        None => {
            let lead = &cluster.members[0];
            let statement = if cluster.members.len() > 1 {
                format!(
                    "Findings on {} likely share one data problem: {}",
                    lead.columns.join(", "),
                    lead.description
                )
            } else {
                lead.description.clone()
            };
            (statement, retrieved.first().copied(), 0.5)
        }
    };
    let citations: Vec<String> = citation.into_iter().map(str::to_string).collect();
    let plausibility = if citations.is_empty() {
        f64::min(plausibility, UNGROUNDED_CAP)
    } else {
        plausibility
    };
    (statement, citations, plausibility)
}

fn documents_block(index: &KbIndex, hits: &[SearchHit]) -> String {
    if hits.is_empty() {
        return "(none)".to_string();
    }
    hits.iter()
        .map(|h| {
            let title = index.document(&h.doc_id).map_or("", |d| d.title.as_str());
            format!("[{}] {}: {}", h.doc_id, title, h.snippet)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Index used for one cluster: the curated corpus plus any web results whose
/// ids do not collide with it.
fn scoped_index(kb: &KbIndex, web: Option<&dyn WebSearch>, query: &str) -> KbIndex {
    let Some(web) = web else { return kb.clone() };
    let mut seen: BTreeSet<String> = kb.documents().iter().map(|d| d.doc_id.clone()).collect();
    let extra: Vec<_> = web
        .search(query)
        .into_iter()
        .filter(|d| !d.body.trim().is_empty() && seen.insert(d.doc_id.clone()))
        .collect();
    if extra.is_empty() {
        return kb.clone();
    }
    kb.extended(extra).unwrap_or_else(|_| kb.clone())
}

fn hypothesize(
    cluster: &FindingCluster,
    kb: &KbIndex,
    web: Option<&dyn WebSearch>,
    provider: &dyn LlmProvider,
    top_k: usize,
) -> ClusterHypothesis {
    let query = retrieval_query(cluster);
    let index = scoped_index(kb, web, &query);
    let hits = index.search(&query, top_k);
    let retrieved: Vec<String> = hits.iter().map(|h| h.doc_id.clone()).collect();
    let evidence = canonical_json(&serde_json::to_value(cluster.evidence()).unwrap_or(Value::Null));
    let prompt = HYPOTHESIS.render(&[
        ("rule_id", cluster.correlation_rule_id()),
        ("narrative", &cluster.narrative),
        ("evidence", &evidence),
        ("documents", &documents_block(&index, &hits)),
        ("doc_ids", &retrieved.join(", ")),
    ]);
    let request = structured_request(prompt, "hypothesis", 0.0, None);
    let supporting: Vec<String> = cluster.members.iter().map(|f| f.finding_id.clone()).collect();
    let parsed = complete_json::<ProposedHypothesis>(provider, request, super::MAX_REPAIRS)
        .map_err(|e| e.to_string())
        .and_then(|(p, _)| {
            if p.statement.trim().is_empty() || !p.plausibility.is_finite() {
                Err("empty statement or non-finite plausibility".to_string())
            } else {
                Ok(p)
            }
        });
    let (statement, kb_citations, plausibility, fallback_used) = match parsed {
        Ok(p) => {
            let mut citations: Vec<String> = Vec::new();
            for c in p.citations {
                if retrieved.contains(&c) && !citations.contains(&c) {
                    citations.push(c);
                }
            }
            let mut plausibility = p.plausibility.clamp(0.0, 1.0);
            if citations.is_empty() {
                plausibility = plausibility.min(UNGROUNDED_CAP);
            }
            (p.statement.trim().to_string(), citations, plausibility, false)
        }
        Err(error) => {
            tracing::debug!(cluster = %cluster.cluster_id, %error, "hypothesis fallback");
            let (s, c, p) = fallback(cluster, &hits);
            (s, c, p, true)
        }
    };
    ClusterHypothesis {
        cluster_id: cluster.cluster_id.clone(),
        query,
        retrieved,
        hypothesis: Hypothesis {
            statement,
            supporting_findings: supporting,
            kb_citations,
            plausibility,
        },
        fallback: fallback_used,
    }
}

/// One hypothesis per cluster whose worst finding is at least low severity,
/// in cluster order. Clusters are handled concurrently.
pub fn generate_hypotheses(
    clusters: &[FindingCluster],
    kb: &KbIndex,
    web: Option<&dyn WebSearch>,
    provider: &dyn LlmProvider,
    top_k: usize,
) -> Vec<ClusterHypothesis> {
    let eligible: Vec<&FindingCluster> = clusters
        .iter()
        .filter(|c| c.max_severity().at_least(Severity::Low))
        .collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = eligible
            .iter()
            .map(|c| s.spawn(move || hypothesize(c, kb, web, provider, top_k)))
            .collect();
        handles
            .into_iter()
            .zip(&eligible)
            .map(|(h, c)| {
                h.join().unwrap_or_else(|_| {
                    let (statement, kb_citations, plausibility) = fallback(c, &[]);
                    ClusterHypothesis {
                        cluster_id: c.cluster_id.clone(),
                        query: retrieval_query(c),
                        retrieved: Vec::new(),
                        hypothesis: Hypothesis {
                            statement,
                            supporting_findings: c.members.iter().map(|f| f.finding_id.clone()).collect(),
                            kb_citations,
                            plausibility,
                        },
                        fallback: true,
                    }
                })
            })
            .collect()
    })
}
