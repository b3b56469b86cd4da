use std::collections::{BTreeMap, BTreeSet};

use aitd_core::tfidf::TfidfModel;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn random_docs(rng: &mut SplitMix64, n: usize, terms: usize, max_len: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len).map(|_| format!("t{}", rng.random_range(0..terms))).collect()
        })
        .collect()
}

#[test]
fn idf_equals_per_term_recount() {
    let mut rng = SplitMix64::seed_from_u64(42);
    for _ in 0..10 {
        let mut docs = random_docs(&mut rng, 20, 15, 8);
        docs[0].push("t0".into());
        let m = TfidfModel::fit(&docs, 1000).unwrap();
        let n = docs.len() as f64;
        for (i, term) in m.vocab.terms().iter().enumerate() {
            let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
            let expected = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            assert!((m.idf[i] - expected).abs() < 1e-12);
        }
    }
}

/// Dense count × idf, then row normalization, computed without the model's
/// internals beyond its vocabulary order.
fn dense_oracle(train: &[Vec<String>], test: &[Vec<String>], max_features: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for d in train {
        for t in d {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(max_features);
    let vocab: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let n = train.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = train
                .iter()
                .filter(|d| d.iter().collect::<BTreeSet<_>>().contains(t))
                .count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let rows = test
        .iter()
        .map(|d| {
            let mut row: Vec<f64> = vocab
                .iter()
                .zip(&idf)
                .map(|(t, w)| d.iter().filter(|x| *x == t).count() as f64 * w)
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect();
    (vocab, rows)
}

fn assert_matches_oracle(train: &[Vec<String>], test: &[Vec<String>], max_features: usize) {
    let m = TfidfModel::fit(train, max_features).unwrap();
    let (vocab, rows) = dense_oracle(train, test, max_features);
    assert_eq!(m.vocab.terms(), vocab.as_slice());
    for (doc, expected) in test.iter().zip(&rows) {
        let got = m.transform(doc).to_dense();
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn three_doc_corpus_five_test_docs_match_dense_oracle() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let train = vec![
        s(&["cat", "sat", "cat sat", "mat"]),
        s(&["dog", "sat", "dog sat", "dog"]),
        s(&["cat", "dog", "cat dog"]),
    ];
    let test = vec![
        s(&["cat"]),
        s(&["dog", "dog", "mat"]),
        s(&["unseen", "words"]),
        s(&["cat sat", "dog sat", "sat", "sat"]),
        s(&[]),
    ];
    assert_matches_oracle(&train, &test, 100);
    assert_matches_oracle(&train, &test, 3);
}

#[test]
fn random_corpora_match_dense_oracle() {
    let mut rng = SplitMix64::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(1..=30);
        let terms = rng.random_range(1..=60);
        let train = random_docs(&mut rng, n, terms, 12);
        if train.iter().all(Vec::is_empty) {
            continue;
        }
        let test = random_docs(&mut rng, 5, terms + 5, 12);
        let max_features = rng.random_range(1..=terms + 2);
        assert_matches_oracle(&train, &test, max_features);
    }
}
