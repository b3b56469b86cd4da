//! Binary logistic regression on sparse features.
//!
//! Objective: `J(w, b) = mean BCE + R(w) / (n·C)` with `R = ½‖w‖²` (L2) or
//! `‖w‖₁` (L1); the bias is not penalized. Training is deterministic
//! full-batch gradient descent with backtracking; the L1 penalty is applied
//! through soft-thresholding after each gradient step.

mod cv;

pub use cv::{
    grid_search_cv, grid_search_cv_observed, kfold_indices, CvRow, CvTable, FitEvent, Grid, GridPoint, GridSearchResult,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::tfidf::SparseVector;

pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        })
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            other => Err(Error::invalid(format!("unknown penalty {other:?} (expected l1 or l2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub penalty: Penalty,
    pub c: f64,
    pub max_iters: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            penalty: Penalty::L2,
            c: 1.0,
            max_iters: 500,
            step_size: 1.0,
            tolerance: 1e-6,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.step_size.is_nan() || self.step_size <= 0.0 {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    /// Objective after each accepted step (index 0 is the starting point).
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
    pub c: f64,
    pub meta: TrainingMeta,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy of one prediction, probability clamped away from 0/1.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

fn soft_threshold(w: f64, t: f64) -> f64 {
    if w > t {
        w - t
    } else if w < -t {
        w + t
    } else {
        0.0
    }
}

impl LogRegModel {
    pub fn zeros(dim: usize, penalty: Penalty, c: f64) -> Self {
        LogRegModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            penalty,
            c,
            meta: TrainingMeta::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, x: &[SparseVector], y: Option<&[Label]>) -> Result<()> {
        if let Some(y) = y {
            if x.len() != y.len() {
                return Err(Error::DimMismatch(format!("{} samples vs {} labels", x.len(), y.len())));
            }
            if x.is_empty() {
                return Err(Error::invalid("need at least one sample"));
            }
        }
        if let Some(bad) = x.iter().find(|v| v.dim != self.dim()) {
            return Err(Error::DimMismatch(format!(
                "feature dimension {} does not match model dimension {}",
                bad.dim,
                self.dim()
            )));
        }
        Ok(())
    }

    fn logit(&self, v: &SparseVector) -> f64 {
        v.dot(&self.weights) + self.bias
    }

    fn regularizer(&self) -> f64 {
        match self.penalty {
            Penalty::L2 => 0.5 * self.weights.iter().map(|w| w * w).sum::<f64>(),
            Penalty::L1 => self.weights.iter().map(|w| w.abs()).sum::<f64>(),
        }
    }

    /// Penalty contribution R(w) / (n·C).
    pub fn penalty_term(&self, n: usize) -> f64 {
        self.regularizer() / (n as f64 * self.c)
    }

    /// Mean BCE without the penalty.
    pub fn data_loss(&self, x: &[SparseVector], y: &[Label]) -> Result<f64> {
        self.check(x, Some(y))?;
        Ok(self.data_loss_unchecked(x, y))
    }

    fn data_loss_unchecked(&self, x: &[SparseVector], y: &[Label]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(y)
            .map(|(v, l)| bce(sigmoid(self.logit(v)), l.as_f64()))
            .sum();
        total / x.len() as f64
    }

    pub fn loss(&self, x: &[SparseVector], y: &[Label]) -> Result<f64> {
        self.check(x, Some(y))?;
        Ok(self.objective_unchecked(x, y))
    }

    fn objective_unchecked(&self, x: &[SparseVector], y: &[Label]) -> f64 {
        self.data_loss_unchecked(x, y) + self.penalty_term(x.len())
    }

    /// Gradient of the smooth part of the objective. For L2 this includes the
    /// penalty `w/(n·C)`; for L1 the penalty is left to the proximal step.
    pub fn gradient(&self, x: &[SparseVector], y: &[Label]) -> Result<(Vec<f64>, f64)> {
        self.check(x, Some(y))?;
        Ok(self.gradient_unchecked(x, y))
    }

    fn gradient_unchecked(&self, x: &[SparseVector], y: &[Label]) -> (Vec<f64>, f64) {
        let n = x.len() as f64;
        let mut gw = vec![0.0; self.dim()];
        let mut gb = 0.0;
        for (v, l) in x.iter().zip(y) {
            let r = sigmoid(self.logit(v)) - l.as_f64();
            gb += r;
            for (i, xv) in v.iter() {
                gw[i] += r * xv;
            }
        }
        for g in &mut gw {
            *g /= n;
        }
        if self.penalty == Penalty::L2 {
            let scale = 1.0 / (n * self.c);
            for (g, w) in gw.iter_mut().zip(&self.weights) {
                *g += w * scale;
            }
        }
        (gw, gb / n)
    }

    pub fn predict_proba(&self, x: &[SparseVector]) -> Result<Vec<f64>> {
        self.check(x, None)?;
        Ok(x.iter().map(|v| sigmoid(self.logit(v))).collect())
    }

    /// `p ≥ threshold` is class 1 (AI).
    pub fn predict(&self, x: &[SparseVector], threshold: f64) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| if p >= threshold { Label::Ai } else { Label::Human })
            .collect())
    }
}

fn require_both_classes(y: &[Label]) -> Result<()> {
    let ai = y.iter().filter(|&&l| l == Label::Ai).count();
    if ai == 0 || ai == y.len() {
        return Err(Error::Degenerate(format!(
            "training data has a single class ({} samples, {ai} AI)",
            y.len()
        )));
    }
    Ok(())
}

/// Full-batch (proximal) gradient descent from zero weights.
///
/// Each iteration starts its line search at `config.step_size` and halves
/// the step until the objective does not increase. Stops when the largest
/// parameter change falls below `config.tolerance` or after `max_iters`.
pub fn train(x: &[SparseVector], y: &[Label], dim: usize, config: &TrainConfig) -> Result<LogRegModel> {
    config.validate()?;
    if x.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {}", x.len())));
    }
    let mut model = LogRegModel::zeros(dim, config.penalty, config.c);
    model.check(x, Some(y))?;
    require_both_classes(y)?;

    let n = x.len() as f64;
    let mut current = model.objective_unchecked(x, y);
    let mut history = vec![current];
    let mut converged = false;
    let mut iterations = 0;
    let mut candidate = model.clone();

    'outer: for _ in 0..config.max_iters {
        let (gw, gb) = model.gradient_unchecked(x, y);
        let mut step = config.step_size;
        let cand_loss = loop {
            for ((cw, w), g) in candidate.weights.iter_mut().zip(&model.weights).zip(&gw) {
                *cw = w - step * g;
            }
            if config.penalty == Penalty::L1 {
                let thr = step / (n * config.c);
                for w in &mut candidate.weights {
                    *w = soft_threshold(*w, thr);
                }
            }
            candidate.bias = model.bias - step * gb;
            let loss = candidate.objective_unchecked(x, y);
            if loss <= current {
                break loss;
            }
            step *= 0.5;
            if step < f64::EPSILON * config.step_size {
                converged = true;
                break 'outer;
            }
        };
        let delta = candidate
            .weights
            .iter()
            .zip(&model.weights)
            .map(|(a, b)| (a - b).abs())
            .fold((candidate.bias - model.bias).abs(), f64::max);
        std::mem::swap(&mut model, &mut candidate);
        current = cand_loss;
        history.push(current);
        iterations += 1;
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }

    model.meta = TrainingMeta {
        iterations,
        final_loss: current,
        converged,
        loss_history: history,
    };
    Ok(model)
}
