//! Self-consistency: sample several completions and keep what they agree on.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::llm::{complete_json, structured_request};
use super::provider::LlmProvider;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

/// The structured part of a reasoning sample.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DiagnosisFragment {
    pub root_cause_category: String,
    #[serde(default)]
    pub actions: Vec<String>,
    pub confidence: f64,
}

/// One completion; failures are kept with their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusSample {
    pub raw: String,
    pub parsed: Result<DiagnosisFragment, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusAction {
    pub text: String,
    /// Samples proposing it.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusFragment {
    pub root_cause_category: String,
    pub agreement: f64,
    pub confidence: f64,
    pub actions: Vec<ConsensusAction>,
    /// Samples that parsed.
    pub parsed: usize,
    /// Samples issued.
    pub issued: usize,
}

pub fn normalize_category(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Lowercase, single-spaced, without trailing punctuation.
pub fn normalize_action(s: &str) -> String {
    let joined = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    joined.trim_end_matches(['.', '!', ';', ',']).to_string()
}

/// Order-independent vote over samples. `None` when nothing parsed.
pub fn aggregate_samples(samples: &[ConsensusSample]) -> Option<ConsensusFragment> {
    let parsed: Vec<&DiagnosisFragment> = samples.iter().filter_map(|s| s.parsed.as_ref().ok()).collect();
    if parsed.is_empty() {
        return None;
    }
    let mut votes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in &parsed {
        let conf = if p.confidence.is_finite() { p.confidence.clamp(0.0, 1.0) } else { 0.0 };
        votes.entry(normalize_category(&p.root_cause_category)).or_default().push(conf);
    }
    // BTreeMap iterates lexically, so a strict `>` keeps the smallest on ties.
    let mut mode: Option<(&String, &Vec<f64>)> = None;
    for (cat, confs) in &votes {
        if mode.is_none_or(|(_, best)| confs.len() > best.len()) {
            mode = Some((cat, confs));
        }
    }
    let (category, confs) = mode?;
    let agreement = confs.len() as f64 / parsed.len() as f64;
    let mut sorted = confs.clone();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;

    let issued = samples.len();
    let needed = issued.div_ceil(2);
    let mut support: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for p in &parsed {
        let mut mine: BTreeMap<String, String> = BTreeMap::new();
        for a in &p.actions {
            let key = normalize_action(a);
            if key.is_empty() {
                continue;
            }
            let text = a.trim().to_string();
            mine.entry(key)
                .and_modify(|t| {
                    if text < *t {
                        *t = text.clone()
                    }
                })
                .or_insert(text);
        }
        for (key, text) in mine {
            support
                .entry(key)
                .and_modify(|(n, t)| {
                    *n += 1;
                    if text < *t {
                        *t = text.clone();
                    }
                })
                .or_insert((1, text));
        }
    }
    let mut actions: Vec<(String, usize, String)> = support
        .into_iter()
        .filter(|(_, (n, _))| *n >= needed)
        .map(|(k, (n, t))| (k, n, t))
        .collect();
    actions.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Some(ConsensusFragment {
        root_cause_category: category.clone(),
        agreement,
        confidence: agreement * mean,
        actions: actions
            .into_iter()
            .map(|(_, support, text)| ConsensusAction { text, support })
            .collect(),
        parsed: parsed.len(),
        issued,
    })
}

/// Issues `k` seeded completions of `prompt` concurrently, then votes.
pub fn self_consistent_complete(
    provider: &dyn LlmProvider,
    prompt: &str,
    k: usize,
    temperature: f64,
    base_seed: u64,
    max_repairs: u32,
) -> (Vec<ConsensusSample>, Option<ConsensusFragment>) {
    let samples: Vec<ConsensusSample> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k as u64)
            .map(|i| {
                s.spawn(move || {
                    let request =
                        structured_request(prompt.to_string(), "diagnosis", temperature, Some(base_seed.wrapping_add(i)));
                    match complete_json::<DiagnosisFragment>(provider, request, max_repairs) {
                        Ok((fragment, raw)) => ConsensusSample {
                            raw,
                            parsed: Ok(fragment),
                        },
                        Err(super::llm::CallError::Unparseable { raw, error }) => ConsensusSample {
                            raw,
                            parsed: Err(error),
                        },
                        Err(e) => ConsensusSample {
                            raw: String::new(),
                            parsed: Err(e.to_string()),
                        },
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| ConsensusSample {
                    raw: String::new(),
                    parsed: Err("sampling thread panicked".into()),
                })
            })
            .collect()
    });
    let fragment = aggregate_samples(&samples);
    (samples, fragment)
}
