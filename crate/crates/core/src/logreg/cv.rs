use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_both_classes, train, LogRegModel, Penalty, TrainConfig};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tfidf::TfidfModel;

/// Shuffle `0..n` with a seeded Fisher–Yates pass and cut it into `k`
/// contiguous folds; the first `n % k` folds get one extra index.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot make {k} folds from {n} samples")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, Stream::Folds, 0));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub max_features: Vec<usize>,
    pub c: Vec<f64>,
    pub penalty: Vec<Penalty>,
}

impl Grid {
    /// 3 vocabulary sizes × 3 C values × 2 penalties.
    pub fn paper() -> Self {
        Grid {
            max_features: vec![15_000, 25_000, 35_000],
            c: vec![0.1, 1.0, 10.0],
            penalty: vec![Penalty::L1, Penalty::L2],
        }
    }

    pub fn single(max_features: usize, c: f64, penalty: Penalty) -> Self {
        Grid {
            max_features: vec![max_features],
            c: vec![c],
            penalty: vec![penalty],
        }
    }

    /// Points in table order: max_features, then C, then penalty.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &max_features in &self.max_features {
            for &c in &self.c {
                for &penalty in &self.penalty {
                    out.push(GridPoint {
                        max_features,
                        c,
                        penalty,
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.max_features.len() * self.c.len() * self.penalty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub max_features: usize,
    pub c: f64,
    pub penalty: Penalty,
}

impl GridPoint {
    pub fn config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            c: self.c,
            penalty: self.penalty,
            ..*base
        }
    }

    // Greater is preferred: smaller vocabulary, then larger C, then L2.
    fn preference(&self, other: &GridPoint) -> Ordering {
        other
            .max_features
            .cmp(&self.max_features)
            .then(self.c.total_cmp(&other.c))
            .then_with(|| match (self.penalty, other.penalty) {
                (Penalty::L2, Penalty::L1) => Ordering::Greater,
                (Penalty::L1, Penalty::L2) => Ordering::Less,
                _ => Ordering::Equal,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub point: GridPoint,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub k: usize,
    pub rows: Vec<CvRow>,
}

impl CvTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("max_features,C,penalty");
        for f in 1..=self.k {
            let _ = write!(s, ",fold_{f}");
        }
        s.push_str(",mean_accuracy\n");
        for row in &self.rows {
            let _ = write!(s, "{},{},{}", row.point.max_features, row.point.c, row.point.penalty);
            for a in &row.fold_accuracies {
                let _ = write!(s, ",{a:.6}");
            }
            let _ = writeln!(s, ",{:.6}", row.mean_accuracy);
        }
        s
    }

    /// Highest mean accuracy; ties go to the preferred grid point.
    pub fn best(&self) -> Option<&CvRow> {
        self.rows.iter().max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                .then_with(|| a.point.preference(&b.point))
        })
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: GridPoint,
    pub config: TrainConfig,
    pub tfidf: TfidfModel,
    pub model: LogRegModel,
    pub table: CvTable,
}

/// A TF-IDF fit performed during the search: which documents it saw.
#[derive(Debug, Clone, Copy)]
pub struct FitEvent<'a> {
    /// `None` for the final refit on all documents.
    pub fold: Option<usize>,
    pub max_features: usize,
    pub doc_indices: &'a [usize],
}

/// k-fold grid search over (vocabulary size, C, penalty), scoring each point
/// by mean held-out accuracy. TF-IDF is refitted on each fold's training part
/// only. The winner is refitted on all documents.
pub fn grid_search_cv<S: AsRef<str> + Sync>(
    docs: &[Vec<S>],
    labels: &[Label],
    grid: &Grid,
    k: usize,
    base: &TrainConfig,
) -> Result<GridSearchResult> {
    grid_search_cv_observed(docs, labels, grid, k, base, &|_| {})
}

/// [`grid_search_cv`] with a hook invoked for every TF-IDF fit.
pub fn grid_search_cv_observed<S: AsRef<str> + Sync>(
    docs: &[Vec<S>],
    labels: &[Label],
    grid: &Grid,
    k: usize,
    base: &TrainConfig,
    observer: &(dyn Fn(&FitEvent<'_>) + Sync),
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    if docs.len() != labels.len() {
        return Err(Error::DimMismatch(format!(
            "{} documents vs {} labels",
            docs.len(),
            labels.len()
        )));
    }
    base.validate()?;
    let folds = kfold_indices(docs.len(), k, base.seed)?;
    let train_sets: Vec<Vec<usize>> = (0..k)
        .map(|held| {
            let mut idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != held)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    for (f, idx) in train_sets.iter().enumerate() {
        let y: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        require_both_classes(&y).map_err(|e| Error::Degenerate(format!("fold {}: {e}", f + 1)))?;
    }

    // One TF-IDF fit per (fold, vocabulary size); every (C, penalty) pair for
    // that fit is trained in the same task.
    let tasks: Vec<(usize, usize)> = (0..k)
        .flat_map(|f| (0..grid.max_features.len()).map(move |m| (f, m)))
        .collect();
    let inner: Vec<(f64, Penalty)> = grid
        .c
        .iter()
        .flat_map(|&c| grid.penalty.iter().map(move |&p| (c, p)))
        .collect();
    let results: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(fold, m)| -> Result<Vec<f64>> {
            let max_features = grid.max_features[m];
            let train_idx = &train_sets[fold];
            observer(&FitEvent {
                fold: Some(fold),
                max_features,
                doc_indices: train_idx,
            });
            let train_docs: Vec<&[S]> = train_idx.iter().map(|&i| docs[i].as_slice()).collect();
            let tfidf = fit_refs(&train_docs, max_features)?;
            let x_train: Vec<_> = train_docs.iter().map(|d| tfidf.transform(d)).collect();
            let y_train: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
            let held = &folds[fold];
            let x_held: Vec<_> = held.iter().map(|&i| tfidf.transform(&docs[i])).collect();
            let y_held: Vec<Label> = held.iter().map(|&i| labels[i]).collect();
            inner
                .iter()
                .map(|&(c, penalty)| {
                    let cfg = TrainConfig { c, penalty, ..*base };
                    let model = train(&x_train, &y_train, tfidf.dim(), &cfg)?;
                    let pred = model.predict(&x_held, 0.5)?;
                    let correct = pred.iter().zip(&y_held).filter(|(a, b)| a == b).count();
                    Ok(correct as f64 / y_held.len() as f64)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(grid.len());
    for (m, &max_features) in grid.max_features.iter().enumerate() {
        for (j, &(c, penalty)) in inner.iter().enumerate() {
            let fold_accuracies: Vec<f64> = (0..k).map(|f| results[f * grid.max_features.len() + m][j]).collect();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
            rows.push(CvRow {
                point: GridPoint {
                    max_features,
                    c,
                    penalty,
                },
                fold_accuracies,
                mean_accuracy,
            });
        }
    }
    let table = CvTable { k, rows };
    let best = table.best().expect("grid is non-empty").point;

    let all: Vec<usize> = (0..docs.len()).collect();
    observer(&FitEvent {
        fold: None,
        max_features: best.max_features,
        doc_indices: &all,
    });
    let tfidf = TfidfModel::fit(docs, best.max_features)?;
    let x = tfidf.transform_all(docs);
    let config = best.config(base);
    let model = train(&x, labels, tfidf.dim(), &config)?;
    Ok(GridSearchResult {
        best,
        config,
        tfidf,
        model,
        table,
    })
}

fn fit_refs<S: AsRef<str> + Sync>(docs: &[&[S]], max_features: usize) -> Result<TfidfModel> {
    let owned: Vec<Vec<&str>> = docs.iter().map(|d| d.iter().map(AsRef::as_ref).collect()).collect();
    TfidfModel::fit(&owned, max_features)
}
