//! Recording stub fixtures: run the pipeline against a stub, answer every
//! prompt it has not seen, repeat until a run needs nothing new.

use std::collections::HashMap;

use serde_json::{json, Value};

use super::aggregate::ClusterRule;
use super::hypotheses::rule_template;
use super::pipeline::Pipeline;
use super::provider::{FixtureMissRecord, StubProvider, StubReply};
use super::rank::rule_action;
use crate::artifact::{ArtifactBundle, Role};

const MAX_ROUNDS: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("fixtures did not converge after {0} rounds")]
pub struct NotConverged(pub usize);

impl Pipeline {
    /// Fixture map covering every prompt the pipeline issues for `bundle`.
    pub fn record_fixtures(
        &self,
        bundle: &ArtifactBundle,
        respond: impl Fn(&FixtureMissRecord) -> StubReply,
    ) -> Result<HashMap<String, StubReply>, NotConverged> {
        let mut fixtures = HashMap::new();
        for _ in 0..MAX_ROUNDS {
            let stub = StubProvider::new(fixtures.clone());
            self.run(bundle, &stub);
            let misses = stub.misses();
            if misses.is_empty() {
                return Ok(fixtures);
            }
            for miss in misses {
                fixtures.entry(miss.hash.clone()).or_insert_with(|| respond(&miss));
            }
        }
        Err(NotConverged(MAX_ROUNDS))
    }
}

fn user_prompt(miss: &FixtureMissRecord) -> &str {
    miss.messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map_or("", |m| m.content.as_str())
}

fn rule_from_id(id: &str) -> Option<ClusterRule> {
    ClusterRule::CANONICAL.into_iter().find(|r| r.as_str() == id)
}

/// Replies that restate the rule-based reasoning: no extra findings, the
/// template hypothesis citing the first offered document, and a synthesis
/// naming the top hypothesis' rule in four of five samples.
pub fn echo_reply(miss: &FixtureMissRecord) -> StubReply {
    let prompt = user_prompt(miss);
    match miss.hint.as_deref() {
        Some("hypothesis") => {
            let rule_id = prompt
                .lines()
                .find_map(|l| l.strip_prefix("Finding group (")?.strip_suffix("):"))
                .unwrap_or("");
            let docs: Vec<&str> = prompt
                .lines()
                .find_map(|l| l.split_once("Citations must be chosen from: ").map(|(_, r)| r))
                .map(|r| r.trim_end_matches('.').split(", ").filter(|s| !s.is_empty()).collect())
                .unwrap_or_default();
            let template = rule_from_id(rule_id).and_then(rule_template);
            let statement = template.map_or("The grouped findings share one underlying data problem", |t| t.0);
            let cite: Vec<&str> = match template {
                Some((_, doc)) if docs.contains(&doc) => vec![doc],
                _ => docs.first().copied().into_iter().collect(),
            };
            StubReply::One(json!({"statement": statement, "plausibility": 0.85, "citations": cite}).to_string())
        }
        Some("diagnosis") => {
            let top_rule = prompt
                .lines()
                .skip_while(|l| *l != "Hypotheses:")
                .nth(1)
                .and_then(|l| serde_json::from_str::<Value>(l).ok())
                .and_then(|v| v.get(0)?.get("rule")?.as_str().map(str::to_string));
            let (category, action) = match top_rule.as_deref().and_then(rule_from_id) {
                Some(rule) => (rule.as_str(), rule_action(rule).unwrap_or_default()),
                None if top_rule.is_some() => ("data-quality", "Review the highest-ranked findings"),
                None => ("no-issue", ""),
            };
            let actions: Vec<&str> = Some(action).filter(|a| !a.is_empty()).into_iter().collect();
            let agree = json!({"root_cause_category": category, "actions": actions, "confidence": 0.9}).to_string();
            let dissent = json!({"root_cause_category": "data-quality", "actions": [], "confidence": 0.4}).to_string();
            StubReply::Many(vec![agree.clone(), agree.clone(), agree.clone(), agree, dissent])
        }
        _ => StubReply::One(r#"{"findings": []}"#.to_string()),
    }
}
