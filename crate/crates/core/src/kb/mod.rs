//! Best-practice knowledge base with BM25 retrieval.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocSource {
    Curated,
    Web,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbDocument {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub source: DocSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has an empty body")]
    EmptyBody(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Lowercased alphanumeric runs of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Immutable BM25 index over a document set.
#[derive(Debug, Clone)]
pub struct KbIndex {
    docs: Vec<KbDocument>,
    lengths: Vec<usize>,
    avg_len: f64,
    /// term → (document position, term frequency), positions ascending.
    postings: HashMap<String, Vec<(usize, u32)>>,
}

impl KbIndex {
    pub fn build(documents: Vec<KbDocument>) -> Result<Self, KbError> {
        let mut ids = HashSet::new();
        let mut lengths = Vec::with_capacity(documents.len());
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            if !ids.insert(doc.doc_id.as_str()) {
                return Err(KbError::DuplicateId(doc.doc_id.clone()));
            }
            if doc.body.trim().is_empty() {
                return Err(KbError::EmptyBody(doc.doc_id.clone()));
            }
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            let mut len = 0;
            for text in std::iter::once(&doc.title).chain(std::iter::once(&doc.body)).chain(&doc.tags) {
                for t in tokenize(text) {
                    *tf.entry(t).or_default() += 1;
                    len += 1;
                }
            }
            lengths.push(len);
            for (term, n) in tf {
                postings.entry(term).or_default().push((i, n));
            }
        }
        let avg_len = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
        };
        Ok(Self {
            docs: documents,
            lengths,
            avg_len,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[KbDocument] {
        &self.docs
    }

    pub fn document(&self, doc_id: &str) -> Option<&KbDocument> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    /// A new index holding these documents plus `extra`, e.g. web results
    /// scoped to one request.
    pub fn extended(&self, extra: Vec<KbDocument>) -> Result<Self, KbError> {
        let mut docs = self.docs.clone();
        docs.extend(extra);
        Self::build(docs)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top `k` documents by BM25; zero scores are left out. Repeated query
    /// terms count once.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        if terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut scores = vec![0.0f64; self.docs.len()];
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &(d, tf) in list {
                let tf = f64::from(tf);
                let norm = 1.0 - BM25_B + BM25_B * self.lengths[d] as f64 / self.avg_len;
                scores[d] += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
            }
        }
        let mut hits: Vec<(usize, f64)> = scores.into_iter().enumerate().filter(|(_, s)| *s > 0.0).collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| self.docs[a.0].doc_id.cmp(&self.docs[b.0].doc_id)));
        hits.truncate(k);
        let wanted: HashSet<&str> = terms.iter().map(String::as_str).collect();
        hits.into_iter()
            .map(|(d, score)| SearchHit {
                doc_id: self.docs[d].doc_id.clone(),
                score,
                snippet: snippet(&self.docs[d].body, &wanted),
            })
            .collect()
    }
}

fn sentences(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = body.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let end_of_sentence = matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
        if end_of_sentence {
            out.push(body[start..=i].trim());
            start = i + 1;
        }
    }
    if start < body.len() && !body[start..].trim().is_empty() {
        out.push(body[start..].trim());
    }
    out
}

/// Body sentence covering the most distinct query terms; the earliest wins
/// ties.
fn snippet(body: &str, terms: &HashSet<&str>) -> String {
    let mut best: Option<(usize, &str)> = None;
    for s in sentences(body) {
        let covered: HashSet<String> = tokenize(s).into_iter().filter(|t| terms.contains(t.as_str())).collect();
        if best.is_none_or(|(n, _)| covered.len() > n) {
            best = Some((covered.len(), s));
        }
    }
    best.map(|(_, s)| s.to_string()).unwrap_or_default()
}

macro_rules! seed_docs {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../kb/", $name, ".json")))),*]
    };
}

const SEED: &[(&str, &str)] = seed_docs!(
    "baseline-and-segment-evaluation",
    "class-imbalance",
    "covariate-drift",
    "data-type-consistency",
    "duplicate-and-conflicting-samples",
    "feature-correlation-and-target-leakage",
    "label-drift-response",
    "missing-values",
    "model-configuration-consistency",
    "outlier-handling",
    "probability-calibration",
    "stratified-splitting",
    "train-test-leakage",
);

/// The curated corpus shipped with the library.
pub fn seed_corpus() -> Vec<KbDocument> {
    SEED.iter()
        .map(|(name, text)| serde_json::from_str(text).unwrap_or_else(|e| panic!("bundled kb document {name}: {e}")))
        .collect()
}

/// Every `*.json` document in `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<KbDocument>, KbError> {
    let io = |source| KbError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).map_err(|source| KbError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| KbError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Source of supplementary documents looked up at query time.
pub trait WebSearch: Send + Sync {
    fn search(&self, query: &str) -> Vec<KbDocument>;
}

/// Offline stand-in that replays fixture documents per exact query.
#[derive(Debug, Clone, Default)]
pub struct StubWebSearch {
    fixtures: HashMap<String, Vec<KbDocument>>,
}

impl StubWebSearch {
    pub fn new(fixtures: HashMap<String, Vec<KbDocument>>) -> Self {
        Self { fixtures }
    }

    /// Fixture file: JSON object mapping query → list of documents.
    pub fn from_file(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fixtures = serde_json::from_str(&text).map_err(|e| KbError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self { fixtures })
    }
}

impl WebSearch for StubWebSearch {
    fn search(&self, query: &str) -> Vec<KbDocument> {
        self.fixtures
            .get(query)
            .map(|docs| {
                docs.iter()
                    .cloned()
                    .map(|mut d| {
                        d.source = DocSource::Web;
                        d
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}
