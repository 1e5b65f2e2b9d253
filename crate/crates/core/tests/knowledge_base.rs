use std::collections::HashMap;

use mlfix_core::kb::{load_dir, seed_corpus, tokenize, DocSource, KbDocument, KbIndex, StubWebSearch, WebSearch};
use proptest::prelude::*;

fn doc(id: &str, body: &str) -> KbDocument {
    KbDocument {
        doc_id: id.into(),
        title: String::new(),
        body: body.into(),
        tags: vec![],
        source: DocSource::Curated,
    }
}

fn filler(token: &str, n: usize) -> String {
    vec![token; n].join(" ")
}

/// Direct evaluation of the BM25 sum for one document.
fn bm25_oracle(docs: &[Vec<String>], query: &[&str], d: usize) -> f64 {
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut score = 0.0;
    for q in query {
        let df = docs.iter().filter(|t| t.iter().any(|w| w == q)).count() as f64;
        let tf = docs[d].iter().filter(|w| w == q).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * docs[d].len() as f64 / avg));
    }
    score
}

#[test]
fn shorter_document_scores_higher_with_exact_values() {
    let short = format!("drift {}", filler("aa", 9));
    let long = format!("drift {}", filler("bb", 99));
    let index = KbIndex::build(vec![doc("long", &long), doc("short", &short)]).unwrap();
    let hits = index.search("drift", 5);
    assert_eq!(hits[0].doc_id, "short");
    let toks = vec![tokenize(&long), tokenize(&short)];
    assert!((hits[0].score - bm25_oracle(&toks, &["drift"], 1)).abs() < 1e-12);
    assert!((hits[1].score - bm25_oracle(&toks, &["drift"], 0)).abs() < 1e-12);
    // hand values: N=2, df=2, idf=ln(1+0.5/2.5)=ln 1.2, avg=55
    let idf = 1.2f64.ln();
    let expected_short = idf * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 10.0 / 55.0));
    assert!((hits[0].score - expected_short).abs() < 1e-12);
}

#[test]
fn unique_term_ranks_its_document_first_and_empty_query_is_empty() {
    let index = KbIndex::build(seed_corpus()).unwrap();
    assert_eq!(index.len(), 13);
    assert_eq!(index.search("calibration", 3)[0].doc_id, "probability-calibration");
    assert!(index.search("", 3).is_empty());
    assert!(index.search("a ! ?", 3).is_empty());
}

#[test]
fn hits_are_sorted_and_positive() {
    let index = KbIndex::build(seed_corpus()).unwrap();
    let hits = index.search("label drift test split leakage imbalance", 13);
    assert!(!hits.is_empty());
    for w in hits.windows(2) {
        assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].doc_id < w[1].doc_id));
    }
    assert!(hits.iter().all(|h| h.score > 0.0));
}

#[test]
fn corpus_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for d in seed_corpus().iter().take(3) {
        std::fs::write(dir.path().join(format!("{}.json", d.doc_id)), serde_json::to_string(d).unwrap()).unwrap();
    }
    let docs = load_dir(dir.path()).unwrap();
    assert_eq!(KbIndex::build(docs).unwrap().len(), 3);
}

#[test]
fn web_results_are_session_local() {
    let web = StubWebSearch::new(HashMap::from([("q".to_string(), vec![doc("web-1", "drift notes")])]));
    let base = KbIndex::build(seed_corpus()).unwrap();
    let scoped = base.extended(web.search("q")).unwrap();
    assert_eq!(scoped.len(), base.len() + 1);
    assert_eq!(scoped.document("web-1").unwrap().source, DocSource::Web);
    assert!(base.document("web-1").is_none());
    assert!(web.search("unknown").is_empty());
}

/// Length normalisation uses the corpus average, so a long irrelevant
/// document can reorder existing hits: here a short single-mention document
/// loses its lead over a long document with three mentions.
#[test]
fn irrelevant_long_document_can_reorder_through_length_normalisation() {
    let docs = vec![
        doc("short", "drift aa"),
        doc("long", &format!("drift drift drift {}", filler("ff", 27))),
        doc("other", &filler("zz", 70)),
    ];
    let before = KbIndex::build(docs.clone()).unwrap().search("drift", 5);
    assert_eq!(before[0].doc_id, "short");
    let mut more = docs;
    more.push(doc("irrelevant", &filler("yy", 200)));
    let after = KbIndex::build(more).unwrap().search("drift", 5);
    assert_eq!(after[0].doc_id, "long");
}

fn corpus() -> impl Strategy<Value = Vec<Vec<u8>>> {
    // documents as token ids 0..6; ids 0..3 are potential query terms
    prop::collection::vec(prop::collection::vec(0u8..6, 1..20), 1..8)
}

fn body(tokens: &[u8]) -> String {
    tokens.iter().map(|t| format!("t{t}")).collect::<Vec<_>>().join(" ")
}

proptest! {
    #[test]
    fn search_matches_oracle_and_is_deterministic(docs in corpus(), query in prop::collection::vec(0u8..4, 1..4)) {
        let kb: Vec<KbDocument> = docs.iter().enumerate().map(|(i, d)| doc(&format!("d{i}"), &body(d))).collect();
        let index = KbIndex::build(kb.clone()).unwrap();
        let q = body(&query);
        let hits = index.search(&q, 10);
        prop_assert_eq!(&hits, &index.search(&q, 10));
        let toks: Vec<Vec<String>> = kb.iter().map(|d| tokenize(&d.body)).collect();
        let mut terms: Vec<String> = tokenize(&q);
        terms.sort();
        terms.dedup();
        let term_refs: Vec<&str> = terms.iter().map(String::as_str).collect();
        for h in &hits {
            let i: usize = h.doc_id[1..].parse().unwrap();
            prop_assert!((h.score - bm25_oracle(&toks, &term_refs, i)).abs() < 1e-9);
        }
    }

    /// With the average length held fixed, an irrelevant document only
    /// rescales the single query term's idf, so order is unchanged.
    #[test]
    fn irrelevant_average_length_document_keeps_order(docs in prop::collection::vec(prop::collection::vec(0u8..6, 4..5), 2..8)) {
        let kb: Vec<KbDocument> = docs.iter().enumerate().map(|(i, d)| doc(&format!("d{i}"), &body(d))).collect();
        let before: Vec<String> = KbIndex::build(kb.clone()).unwrap().search("t0", 10).into_iter().map(|h| h.doc_id).collect();
        let mut more = kb;
        more.push(doc("zz", "u1 u2 u3 u4"));
        let after: Vec<String> = KbIndex::build(more).unwrap().search("t0", 10).into_iter().map(|h| h.doc_id).collect();
        prop_assert_eq!(before, after);
    }
}
