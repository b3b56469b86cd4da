//! Smoothed-idf TF-IDF with raw term counts and L2 row normalization.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::textproc::{build_vocab, Vocab};

/// Sparse row with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimMismatch(format!(
                "{} indices vs {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sparse indices must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i as usize >= dim) {
            return Err(Error::DimMismatch(format!("index out of range for dim {dim}")));
        }
        Ok(SparseVector { indices, values, dim })
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .map(|&i| i as usize)
            .zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    pub vocab: Vocab,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn from_parts(vocab: Vocab, idf: Vec<f64>, n_docs: usize) -> Result<Self> {
        if idf.len() != vocab.len() {
            return Err(Error::DimMismatch(format!(
                "idf has {} entries for a {}-term vocabulary",
                idf.len(),
                vocab.len()
            )));
        }
        if n_docs == 0 {
            return Err(Error::invalid("TF-IDF model must be fitted on at least one document"));
        }
        Ok(TfidfModel { vocab, idf, n_docs })
    }

    /// Fit on gram sequences, keeping the `max_features` most frequent terms.
    pub fn fit<S: AsRef<str> + Sync>(docs: &[Vec<S>], max_features: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
        }
        let vocab = build_vocab(docs, max_features, false)?;
        let df = docs
            .par_iter()
            .fold(
                || vec![0usize; vocab.len()],
                |mut acc, doc| {
                    let mut hit: Vec<u32> = doc.iter().filter_map(|t| vocab.get(t.as_ref())).collect();
                    hit.sort_unstable();
                    hit.dedup();
                    for i in hit {
                        acc[i as usize] += 1;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0usize; vocab.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        let idf = df.iter().map(|&d| smoothed_idf(docs.len(), d)).collect();
        Self::from_parts(vocab, idf, docs.len())
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    /// count × idf for in-vocabulary terms, L2-normalized. A document with no
    /// in-vocabulary terms maps to the empty vector.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in doc {
            if let Some(i) = self.vocab.get(t.as_ref()) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut indices = Vec::with_capacity(counts.len());
        let mut values = Vec::with_capacity(counts.len());
        for (i, c) in counts {
            indices.push(i);
            values.push(c * self.idf[i as usize]);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        SparseVector {
            indices,
            values,
            dim: self.dim(),
        }
    }

    pub fn transform_all<S: AsRef<str> + Sync>(&self, docs: &[Vec<S>]) -> Vec<SparseVector> {
        docs.par_iter().map(|d| self.transform(d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn single_doc_idf_is_one() {
        let m = TfidfModel::fit(&[s(&["cat"])], 10).unwrap();
        assert_eq!(m.idf, vec![1.0]);
        let v = m.transform(&s(&["cat"]));
        assert_eq!(v.indices, vec![0]);
        assert_eq!(v.values, vec![1.0]);
    }

    #[test]
    fn two_doc_closed_form() {
        let m = TfidfModel::fit(&[s(&["cat"]), s(&["cat", "dog"])], 10).unwrap();
        let cat = m.vocab.get("cat").unwrap() as usize;
        let dog = m.vocab.get("dog").unwrap() as usize;
        assert_eq!(m.idf[cat], 1.0);
        assert_eq!(m.idf[dog], (3.0f64 / 2.0).ln() + 1.0);
        assert_eq!(m.n_docs, 2);
    }

    #[test]
    fn oov_doc_is_empty() {
        let m = TfidfModel::fit(&[s(&["cat"])], 10).unwrap();
        let v = m.transform(&s(&["zebra", "yak"]));
        assert!(v.is_empty());
        assert_eq!(v.norm(), 0.0);
        assert_eq!(v.dim, 1);
    }

    #[test]
    fn empty_fit_is_error() {
        assert!(TfidfModel::fit::<String>(&[], 5).is_err());
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(vec![1, 1], vec![1.0, 2.0], 3).is_err());
        assert!(SparseVector::new(vec![3], vec![1.0], 3).is_err());
        assert!(SparseVector::new(vec![0, 2], vec![1.0], 3).is_err());
        let v = SparseVector::new(vec![0, 2], vec![3.0, 4.0], 3).unwrap();
        assert_eq!(v.norm(), 5.0);
        assert_eq!(v.to_dense(), vec![3.0, 0.0, 4.0]);
    }

    fn doc_strategy() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-h]", 0..12)
    }

    proptest! {
        #[test]
        fn unit_norm_and_repetition_invariance(
            train in prop::collection::vec(doc_strategy(), 1..10),
            doc in doc_strategy(),
        ) {
            let m = TfidfModel::fit(&train, 6).unwrap_or_else(|_| TfidfModel::fit(&[s(&["a"])], 6).unwrap());
            let v = m.transform(&doc);
            if !v.is_empty() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            let doubled: Vec<String> = doc.iter().chain(doc.iter()).cloned().collect();
            let w = m.transform(&doubled);
            prop_assert_eq!(&w.indices, &v.indices);
            for (a, b) in w.values.iter().zip(&v.values) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn fit_is_deterministic(train in prop::collection::vec(doc_strategy(), 1..10)) {
            prop_assume!(train.iter().any(|d| !d.is_empty()));
            let a = TfidfModel::fit(&train, 5).unwrap();
            let b = TfidfModel::fit(&train, 5).unwrap();
            prop_assert_eq!(a.vocab.terms(), b.vocab.terms());
            prop_assert_eq!(
                a.idf.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.idf.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
