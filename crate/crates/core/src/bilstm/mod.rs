//! Bidirectional LSTM classifier trained from scratch.
//!
//! Architecture: embedding (PAD row frozen at zero) → forward and backward
//! LSTM over the unpadded prefix → concat of the two terminal hidden states
//! (2H) → dense 2H→D with ReLU → inverted dropout → dense D→1 → sigmoid.
//!
//! All parameters live in one flat `f64` buffer; [`Layout`] names the
//! ranges. The buffer order is also the persisted payload order.

mod adam;
mod cell;
mod network;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cell::{lstm_cell, LstmParams};
pub use network::{dropout, ForwardCache, Gradients, Mode};
pub use train::{
    net_grid, predict_proba, run_early_stopping, train, EarlyStopping, EpochRecord, NetTrainConfig, SequenceExample,
    TrainHistory,
};

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::textproc::PAD_ID;

/// Gate blocks are stacked in this order along the 4H axis.
pub const GATE_ORDER: [&str; 4] = ["i", "f", "g", "o"];

const EMBED_INIT_STD: f64 = 0.1;
const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub dense: usize,
}

impl Dims {
    /// Dense width defaults to 2H.
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        Dims {
            vocab,
            embed,
            hidden,
            dense: 2 * hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.embed == 0 || self.hidden == 0 || self.dense == 0 {
            return Err(Error::invalid(format!("invalid network dimensions {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub w: Range<usize>,
    pub u: Range<usize>,
    pub b: Range<usize>,
}

/// Offsets of each parameter tensor in the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embedding: Range<usize>,
    pub fwd: BlockLayout,
    pub bwd: BlockLayout,
    pub fc1_w: Range<usize>,
    pub fc1_b: Range<usize>,
    pub fc2_w: Range<usize>,
    pub fc2_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(d: &Dims) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let embedding = take(d.vocab * d.embed);
        let mut block = || BlockLayout {
            w: take(4 * d.hidden * d.embed),
            u: take(4 * d.hidden * d.hidden),
            b: take(4 * d.hidden),
        };
        let fwd = block();
        let bwd = block();
        let fc1_w = take(d.dense * 2 * d.hidden);
        let fc1_b = take(d.dense);
        let fc2_w = take(d.dense);
        let fc2_b = take(1);
        Layout {
            embedding,
            fwd,
            bwd,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            total: at,
        }
    }

    /// Named tensors in buffer order.
    pub fn tensors(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![
            ("embedding", self.embedding.clone()),
            ("fwd.w", self.fwd.w.clone()),
            ("fwd.u", self.fwd.u.clone()),
            ("fwd.b", self.fwd.b.clone()),
            ("bwd.w", self.bwd.w.clone()),
            ("bwd.u", self.bwd.u.clone()),
            ("bwd.b", self.bwd.b.clone()),
            ("fc1.w", self.fc1_w.clone()),
            ("fc1.b", self.fc1_b.clone()),
            ("fc2.w", self.fc2_w.clone()),
            ("fc2.b", self.fc2_b.clone()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    dims: Dims,
    layout: Layout,
    params: Vec<f64>,
}

impl BiLstmModel {
    pub fn zeros(dims: Dims) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        Ok(BiLstmModel {
            params: vec![0.0; layout.total],
            dims,
            layout,
        })
    }

    /// Wrap an existing flat parameter buffer.
    pub fn from_params(dims: Dims, params: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        if params.len() != layout.total {
            return Err(Error::DimMismatch(format!(
                "expected {} parameters for {dims:?}, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        if params[layout.embedding.start..layout.embedding.start + dims.embed]
            .iter()
            .any(|&p| p != 0.0)
        {
            return Err(Error::invalid("PAD embedding row must be zero"));
        }
        Ok(BiLstmModel { dims, layout, params })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn embedding_row(&self, id: u32) -> &[f64] {
        let start = self.layout.embedding.start + id as usize * self.dims.embed;
        &self.params[start..start + self.dims.embed]
    }

    pub fn block(&self, dir: Direction) -> LstmParams<'_> {
        let b = match dir {
            Direction::Forward => &self.layout.fwd,
            Direction::Backward => &self.layout.bwd,
        };
        LstmParams {
            w: &self.params[b.w.clone()],
            u: &self.params[b.u.clone()],
            b: &self.params[b.b.clone()],
            input: self.dims.embed,
            hidden: self.dims.hidden,
        }
    }

    pub fn fc1_w(&self) -> &[f64] {
        &self.params[self.layout.fc1_w.clone()]
    }

    pub fn fc1_b(&self) -> &[f64] {
        &self.params[self.layout.fc1_b.clone()]
    }

    pub fn fc2_w(&self) -> &[f64] {
        &self.params[self.layout.fc2_w.clone()]
    }

    pub fn fc2_b(&self) -> f64 {
        self.params[self.layout.fc2_b.start]
    }

    /// Seeded initialization:
    /// - embedding rows other than PAD ~ N(0, 0.1²), PAD row zero;
    /// - LSTM W and U ~ U(±1/√H), biases zero except the forget gate (1.0);
    /// - dense weights ~ U(±1/√fan_in), biases zero.
    pub fn init(dims: Dims, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        let mut rng = rng::stream(seed, Stream::Init, 0);
        let normal = Normal::new(0.0, EMBED_INIT_STD).expect("valid std");
        let d = dims;
        let emb = m.layout.embedding.clone();
        for (k, p) in m.params[emb].iter_mut().enumerate() {
            *p = if k / d.embed == PAD_ID as usize {
                0.0
            } else {
                normal.sample(&mut rng)
            };
        }

        let lstm_bound = 1.0 / (d.hidden as f64).sqrt();
        let blocks = [m.layout.fwd.clone(), m.layout.bwd.clone()];
        for block in &blocks {
            for r in [block.w.clone(), block.u.clone()] {
                for p in &mut m.params[r] {
                    *p = rng.random_range(-lstm_bound..lstm_bound);
                }
            }
            let forget = block.b.start + d.hidden..block.b.start + 2 * d.hidden;
            m.params[forget].fill(FORGET_BIAS_INIT);
        }

        let fc1_bound = 1.0 / ((2 * d.hidden) as f64).sqrt();
        for p in &mut m.params[m.layout.fc1_w.clone()] {
            *p = rng.random_range(-fc1_bound..fc1_bound);
        }
        let fc2_bound = 1.0 / (d.dense as f64).sqrt();
        for p in &mut m.params[m.layout.fc2_w.clone()] {
            *p = rng.random_range(-fc2_bound..fc2_bound);
        }
        Ok(m)
    }
}

/// Seeded model initialization.
pub fn init_weights(dims: Dims, seed: u64) -> Result<BiLstmModel> {
    BiLstmModel::init(dims, seed)
}
