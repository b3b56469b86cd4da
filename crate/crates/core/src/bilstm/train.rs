use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::Mode;
use super::{BiLstmModel, Dims};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::logreg::bce;
use crate::rng::{self, Stream};

/// Hyperparameters for one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetTrainConfig {
    pub embed_dim: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NetTrainConfig {
    fn default() -> Self {
        NetTrainConfig {
            embed_dim: 128,
            hidden_units: 128,
            dropout_rate: 0.3,
            batch_size: 128,
            learning_rate: 1e-3,
            max_epochs: 15,
            patience: 3,
            seed: rng::DEFAULT_SEED,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl NetTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate {} outside [0,1)",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("max_epochs and patience must be at least 1"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// The 36-point search space: units × dropout × batch size × learning rate.
pub fn net_grid(base: &NetTrainConfig) -> Vec<NetTrainConfig> {
    let mut out = Vec::with_capacity(36);
    for hidden_units in [64, 128, 256] {
        for dropout_rate in [0.2, 0.3, 0.5] {
            for batch_size in [128, 256] {
                for learning_rate in [0.0005, 0.001] {
                    out.push(NetTrainConfig {
                        hidden_units,
                        dropout_rate,
                        batch_size,
                        learning_rate,
                        ..*base
                    });
                }
            }
        }
    }
    out
}

/// Encoded sequence with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceExample {
    pub ids: Vec<u32>,
    pub len: usize,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                e.epoch, e.train_loss, e.val_loss, e.val_acc
            ));
        }
        s
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// Patience counter on validation accuracy. Only strict improvements reset
/// it, so ties keep the earliest epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    /// Record an epoch; returns true if it is the new best.
    pub fn observe(&mut self, epoch: usize, val_acc: f64) -> bool {
        match self.best {
            Some((_, b)) if val_acc <= b => {
                self.since_best += 1;
                false
            }
            _ => {
                self.best = Some((epoch, val_acc));
                self.since_best = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Replay a scripted validation-accuracy sequence through the stopping rule.
/// Returns (stopped_epoch, best_epoch), both 1-based.
pub fn run_early_stopping(val_accs: &[f64], patience: usize, max_epochs: usize) -> (usize, usize) {
    let mut es = EarlyStopping::new(patience);
    let mut stopped = 0;
    for (i, &acc) in val_accs.iter().take(max_epochs).enumerate() {
        stopped = i + 1;
        es.observe(stopped, acc);
        if es.should_stop() {
            break;
        }
    }
    (stopped, es.best_epoch().unwrap_or(0))
}

fn check_examples(examples: &[SequenceExample], vocab: usize) -> Result<()> {
    for (i, ex) in examples.iter().enumerate() {
        if ex.len > ex.ids.len() {
            return Err(Error::invalid(format!("example {i}: true length exceeds sequence")));
        }
        if let Some(&id) = ex.ids[..ex.len].iter().find(|&&id| id as usize >= vocab) {
            return Err(Error::invalid(format!(
                "example {i}: token id {id} outside vocabulary {vocab}"
            )));
        }
    }
    Ok(())
}

/// Eval-mode probabilities, in input order.
pub fn predict_proba(model: &BiLstmModel, examples: &[SequenceExample]) -> Result<Vec<f64>> {
    examples
        .par_iter()
        .map(|ex| model.predict_one(&ex.ids, ex.len))
        .collect()
}

fn evaluate(model: &BiLstmModel, examples: &[SequenceExample]) -> Result<(f64, f64)> {
    let probs = predict_proba(model, examples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, ex) in probs.iter().zip(examples) {
        loss += bce(*p, ex.label.as_f64());
        let pred = if *p >= 0.5 { Label::Ai } else { Label::Human };
        correct += usize::from(pred == ex.label);
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch Adam training with early stopping on validation accuracy.
///
/// Each epoch visits the training set in a seeded shuffle order. Per-example
/// passes within a batch may run in parallel; their gradients are summed in
/// batch order, so results do not depend on the thread count. Returns the
/// parameters of the best validation epoch (earliest on ties).
pub fn train(
    train_set: &[SequenceExample],
    val_set: &[SequenceExample],
    vocab_size: usize,
    config: &NetTrainConfig,
) -> Result<(BiLstmModel, TrainHistory)> {
    config.validate()?;
    if val_set.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let ai = train_set.iter().filter(|e| e.label == Label::Ai).count();
    if ai == 0 || ai == train_set.len() {
        return Err(Error::Degenerate(format!(
            "training set has a single class ({} examples, {ai} AI)",
            train_set.len()
        )));
    }
    check_examples(train_set, vocab_size)?;
    check_examples(val_set, vocab_size)?;

    let dims = Dims::new(vocab_size, config.embed_dim, config.hidden_units);
    let mut model = BiLstmModel::init(dims, config.seed)?;
    let layout = model.layout().clone();
    let adam = config.adam();
    let mut state = AdamState::new(layout.total);
    let mut grad = vec![0.0; layout.total];
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params().to_vec();
    let mut history = TrainHistory::default();
    let mode = Mode::Train {
        dropout: config.dropout_rate,
    };
    let n = train_set.len();

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(config.seed, Stream::Shuffle, epoch as u64));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let first = (b * config.batch_size) as u64;
            let current = &model;
            let results: Vec<(f64, super::Gradients)> = batch
                .par_iter()
                .enumerate()
                .map(|(k, &idx)| -> Result<_> {
                    let ex = &train_set[idx];
                    let stream_index = (epoch as u64) << 40 | (first + k as u64);
                    let mut drop_rng = rng::stream(config.seed, Stream::Dropout, stream_index);
                    let cache = current.forward(&ex.ids, ex.len, mode, &mut drop_rng)?;
                    Ok((cache.loss(ex.label), current.backward_scaled(&cache, ex.label, scale)))
                })
                .collect::<Result<_>>()?;
            grad.fill(0.0);
            for (loss, g) in &results {
                loss_sum += loss;
                g.accumulate_into(&mut grad, &layout, dims.embed);
            }
            adam_step(model.params_mut(), &grad, &mut state, &adam);
        }
        let (val_loss, val_acc) = evaluate(&model, val_set)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            val_loss,
            val_acc,
        });
        log::info!(
            "epoch {epoch}: train_loss={:.4} val_loss={val_loss:.4} val_acc={val_acc:.4}",
            loss_sum / n as f64
        );
        if stopper.observe(epoch, val_acc) {
            best_params.copy_from_slice(model.params());
        }
        history.stopped_epoch = epoch;
        if stopper.should_stop() {
            break;
        }
    }
    history.best_epoch = stopper.best_epoch().unwrap_or(0);
    let best = BiLstmModel::from_params(dims, best_params)?;
    Ok((best, history))
}
