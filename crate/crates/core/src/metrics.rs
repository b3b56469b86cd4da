//! Binary classification metrics. AI (label 1) is the positive class.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Build from the published error counts and class supports.
    pub fn from_errors(human: u64, ai: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix {
            tp: ai - fn_,
            fp,
            fn_,
            tn: human - fp,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Matrix with the human class treated as positive.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn accuracy(&self) -> f64 {
        safe_div(self.tp + self.tn, self.total())
    }

    /// `actual,predicted_human,predicted_ai` rows.
    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_human,predicted_ai\nhuman,{},{}\nai,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

fn safe_div(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimMismatch(format!(
            "{} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("confusion matrix needs at least one sample"));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (Label::Ai, Label::Ai) => cm.tp += 1,
            (Label::Human, Label::Ai) => cm.fp += 1,
            (Label::Ai, Label::Human) => cm.fn_ += 1,
            (Label::Human, Label::Human) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// [`confusion`] over raw integer labels; values other than 0/1 are rejected.
pub fn confusion_raw(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    let conv = |v: &[u8]| -> Result<Vec<Label>> {
        v.iter()
            .map(|&x| Label::try_from(x).map_err(Error::InvalidInput))
            .collect()
    };
    confusion(&conv(y_true)?, &conv(y_pred)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let precision = safe_div(cm.tp, cm.tp + cm.fp);
    let recall = safe_div(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: cm.tp + cm.fn_,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub human: ClassMetrics,
    pub ai: ClassMetrics,
    pub accuracy: f64,
}

/// Per-class precision/recall/F1 plus accuracy; every 0/0 is 0.
pub fn prf(cm: &ConfusionMatrix) -> Result<ClassReport> {
    if cm.total() == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    Ok(ClassReport {
        human: class_metrics(&cm.swapped()),
        ai: class_metrics(cm),
        accuracy: cm.accuracy(),
    })
}

fn check_scores(y_true: &[Label], scores: &[f64]) -> Result<(u64, u64)> {
    if y_true.len() != scores.len() {
        return Err(Error::DimMismatch(format!(
            "{} labels vs {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = y_true.iter().filter(|&&l| l == Label::Ai).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("ROC analysis needs both classes".into()));
    }
    Ok((pos, neg))
}

/// (score, positives, negatives) per distinct score, descending.
fn score_groups(y_true: &[Label], scores: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let s = scores[i];
        let (p, n) = match y_true[i] {
            Label::Ai => (1, 0),
            Label::Human => (0, 1),
        };
        match groups.last_mut() {
            // -0.0 and 0.0 compare equal and share a threshold
            Some(g) if g.0 == s => {
                g.1 += p;
                g.2 += n;
            }
            _ => groups.push((s, p, n)),
        }
    }
    groups
}

/// Mann–Whitney AUC: P(score of random positive > score of random negative),
/// ties counted as one half. Pair counts are exact integers.
pub fn auc(y_true: &[Label], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_scores(y_true, scores)?;
    let groups = score_groups(y_true, scores);
    // walk ascending so `neg_below` counts negatives with strictly lower score
    let mut neg_below: u128 = 0;
    let mut twice_wins: u128 = 0;
    for &(_, p, n) in groups.iter().rev() {
        twice_wins += 2 * p as u128 * neg_below + p as u128 * n as u128;
        neg_below += n as u128;
    }
    Ok(twice_wins as f64 / (2 * pos as u128 * neg as u128) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive; the origin uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        s
    }
}

/// Sweep thresholds over the distinct scores, highest first.
pub fn roc_curve(y_true: &[Label], scores: &[f64]) -> Result<RocCurve> {
    let (pos, neg) = check_scores(y_true, scores)?;
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (s, p, n) in score_groups(y_true, scores) {
        tp += p;
        fp += n;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve {
        points,
        auc: auc(y_true, scores)?,
    })
}

/// Training minus test accuracy, in percentage points.
pub fn overfit_gap(train_acc: f64, test_acc: f64) -> f64 {
    (train_acc - test_acc) * 100.0
}
