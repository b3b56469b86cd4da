use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::cell::{step, step_backward, BlockGrads, StepCache};
use super::{BiLstmModel, Direction, Layout};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::logreg::{bce, sigmoid};
use crate::rng::{self, Stream};
use crate::textproc::PAD_ID;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout with the given rate after the first dense layer.
    Train {
        dropout: f64,
    },
    Eval,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0,1), got {rate}")));
    }
    Ok(())
}

fn dropout_mask(len: usize, rate: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout: in train mode each component is zeroed with
/// probability `rate` and survivors are scaled by 1/(1−rate); eval mode is
/// the identity.
pub fn dropout(v: &[f64], rate: f64, rng: &mut dyn RngCore, mode: Mode) -> Result<Vec<f64>> {
    check_rate(rate)?;
    match mode {
        Mode::Eval => Ok(v.to_vec()),
        Mode::Train { .. } if rate == 0.0 => Ok(v.to_vec()),
        Mode::Train { .. } => Ok(v
            .iter()
            .zip(dropout_mask(v.len(), rate, rng))
            .map(|(x, m)| x * m)
            .collect()),
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) tokens: Vec<u32>,
    pub(crate) fwd: Vec<StepCache>,
    /// Steps in processing order, i.e. from the last token to the first.
    pub(crate) bwd: Vec<StepCache>,
    pub(crate) rep: Vec<f64>,
    pub(crate) fc1_pre: Vec<f64>,
    pub(crate) mask: Option<Vec<f64>>,
    pub(crate) fc2_in: Vec<f64>,
    pub probability: f64,
}

impl ForwardCache {
    /// Concatenated terminal hidden states (length 2H).
    pub fn representation(&self) -> &[f64] {
        &self.rep
    }

    pub fn loss(&self, label: Label) -> f64 {
        bce(self.probability, label.as_f64())
    }
}

fn run_direction(model: &BiLstmModel, dir: Direction, tokens: impl Iterator<Item = u32>) -> Vec<StepCache> {
    let p = model.block(dir);
    let h = model.dims.hidden;
    let mut steps: Vec<StepCache> = Vec::new();
    let zeros = vec![0.0; h];
    for id in tokens {
        let (h_prev, c_prev) = match steps.last() {
            Some(s) => (s.h.as_slice(), s.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let s = step(&p, model.embedding_row(id), h_prev, c_prev);
        steps.push(s);
    }
    steps
}

impl BiLstmModel {
    /// Forward pass over `ids[..len]`; positions at or beyond `len` are never
    /// read. In eval mode `rng` is untouched.
    pub fn forward(&self, ids: &[u32], len: usize, mode: Mode, rng: &mut dyn RngCore) -> Result<ForwardCache> {
        if len > ids.len() {
            return Err(Error::DimMismatch(format!(
                "true length {len} exceeds sequence length {}",
                ids.len()
            )));
        }
        let tokens = &ids[..len];
        if let Some(&bad) = tokens.iter().find(|&&id| id as usize >= self.dims.vocab) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of size {}",
                self.dims.vocab
            )));
        }
        if let Mode::Train { dropout } = mode {
            check_rate(dropout)?;
        }
        let h = self.dims.hidden;
        let d = self.dims.dense;

        let fwd = run_direction(self, Direction::Forward, tokens.iter().copied());
        let bwd = run_direction(self, Direction::Backward, tokens.iter().rev().copied());
        let mut rep = vec![0.0; 2 * h];
        if let (Some(f), Some(b)) = (fwd.last(), bwd.last()) {
            rep[..h].copy_from_slice(&f.h);
            rep[h..].copy_from_slice(&b.h);
        }

        let w1 = self.fc1_w();
        let fc1_pre: Vec<f64> = (0..d)
            .map(|j| {
                let row = &w1[j * 2 * h..(j + 1) * 2 * h];
                self.fc1_b()[j] + row.iter().zip(&rep).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let act: Vec<f64> = fc1_pre.iter().map(|&z| z.max(0.0)).collect();
        let mask = match mode {
            Mode::Train { dropout } if dropout > 0.0 => Some(dropout_mask(d, dropout, rng)),
            _ => None,
        };
        let fc2_in: Vec<f64> = match &mask {
            Some(m) => act.iter().zip(m).map(|(a, m)| a * m).collect(),
            None => act,
        };
        let logit = self.fc2_b() + self.fc2_w().iter().zip(&fc2_in).map(|(w, x)| w * x).sum::<f64>();
        Ok(ForwardCache {
            tokens: tokens.to_vec(),
            fwd,
            bwd,
            rep,
            fc1_pre,
            mask,
            fc2_in,
            probability: sigmoid(logit),
        })
    }

    /// Eval-mode probability of the AI class.
    pub fn predict_one(&self, ids: &[u32], len: usize) -> Result<f64> {
        // eval mode never draws from the generator
        let mut unused = rng::stream(0, Stream::Dropout, 0);
        Ok(self.forward(ids, len, Mode::Eval, &mut unused)?.probability)
    }

    /// Reverse-mode gradients of `scale × BCE(p, label)` for every parameter.
    pub fn backward(&self, cache: &ForwardCache, label: Label) -> Gradients {
        self.backward_scaled(cache, label, 1.0)
    }

    pub fn backward_scaled(&self, cache: &ForwardCache, label: Label, scale: f64) -> Gradients {
        let l = &self.layout;
        let h = self.dims.hidden;
        let d = self.dims.dense;
        let e = self.dims.embed;
        let mut g = Gradients::zeros(l);
        let off = l.embedding.end;
        let dense = |r: &std::ops::Range<usize>| r.start - off..r.end - off;

        let dz = (cache.probability - label.as_f64()) * scale;
        g.dense[dense(&l.fc2_b)][0] = dz;
        let fc2_w = self.fc2_w();
        let mut d_pre = vec![0.0; d];
        {
            let gw2 = &mut g.dense[dense(&l.fc2_w)];
            for j in 0..d {
                gw2[j] = dz * cache.fc2_in[j];
                let mut da = dz * fc2_w[j];
                if let Some(m) = &cache.mask {
                    da *= m[j];
                }
                d_pre[j] = if cache.fc1_pre[j] > 0.0 { da } else { 0.0 };
            }
        }
        let w1 = self.fc1_w();
        let mut d_rep = vec![0.0; 2 * h];
        {
            let gw1 = &mut g.dense[dense(&l.fc1_w)];
            for j in 0..d {
                if d_pre[j] == 0.0 {
                    continue;
                }
                for k in 0..2 * h {
                    gw1[j * 2 * h + k] += d_pre[j] * cache.rep[k];
                    d_rep[k] += d_pre[j] * w1[j * 2 * h + k];
                }
            }
            g.dense[dense(&l.fc1_b)].copy_from_slice(&d_pre);
        }

        let mut emb: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let n = cache.tokens.len();
        for (dir, steps, d_last) in [
            (Direction::Forward, &cache.fwd, &d_rep[..h]),
            (Direction::Backward, &cache.bwd, &d_rep[h..]),
        ] {
            if steps.is_empty() {
                continue;
            }
            let block = match dir {
                Direction::Forward => &l.fwd,
                Direction::Backward => &l.bwd,
            };
            let p = self.block(dir);
            let (gw, rest) = g.dense[block.w.start - off..block.b.end - off].split_at_mut(block.w.len());
            let (gu, gb) = rest.split_at_mut(block.u.len());
            let mut grads = BlockGrads { w: gw, u: gu, b: gb };
            let zeros = vec![0.0; h];
            let mut dh = d_last.to_vec();
            let mut dc = vec![0.0; h];
            let mut dx = vec![0.0; e];
            for t in (0..steps.len()).rev() {
                let token = match dir {
                    Direction::Forward => cache.tokens[t],
                    Direction::Backward => cache.tokens[n - 1 - t],
                };
                let (h_prev, c_prev) = if t == 0 {
                    (zeros.as_slice(), zeros.as_slice())
                } else {
                    (steps[t - 1].h.as_slice(), steps[t - 1].c.as_slice())
                };
                let (dh_prev, dc_prev) = step_backward(
                    &p,
                    &steps[t],
                    self.embedding_row(token),
                    h_prev,
                    c_prev,
                    &dh,
                    &dc,
                    &mut grads,
                    &mut dx,
                );
                if token != PAD_ID {
                    let row = emb.entry(token).or_insert_with(|| vec![0.0; e]);
                    for (r, v) in row.iter_mut().zip(&dx) {
                        *r += v;
                    }
                }
                dh = dh_prev;
                dc = dc_prev;
            }
        }
        g.embedding = emb.into_iter().collect();
        g
    }
}

/// Parameter gradients: sparse embedding rows plus every other tensor
/// densely, in layout order starting right after the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// (token id, row gradient), ids ascending; never contains PAD.
    pub embedding: Vec<(u32, Vec<f64>)>,
    pub dense: Vec<f64>,
}

impl Gradients {
    pub fn zeros(layout: &Layout) -> Self {
        Gradients {
            embedding: Vec::new(),
            dense: vec![0.0; layout.total - layout.embedding.end],
        }
    }

    /// Add into a full-size flat buffer.
    pub fn accumulate_into(&self, flat: &mut [f64], layout: &Layout, embed: usize) {
        for (id, row) in &self.embedding {
            let start = layout.embedding.start + *id as usize * embed;
            for (f, v) in flat[start..start + embed].iter_mut().zip(row) {
                *f += v;
            }
        }
        for (f, v) in flat[layout.embedding.end..].iter_mut().zip(&self.dense) {
            *f += v;
        }
    }

    pub fn to_flat(&self, layout: &Layout, embed: usize) -> Vec<f64> {
        let mut flat = vec![0.0; layout.total];
        self.accumulate_into(&mut flat, layout, embed);
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::super::{init_weights, Dims};
    use super::*;

    fn rng0() -> rand_xoshiro::SplitMix64 {
        rng::stream(0, Stream::Dropout, 0)
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = BiLstmModel::zeros(Dims::new(6, 3, 2)).unwrap();
        assert_eq!(m.predict_one(&[2, 3, 4, 0], 3).unwrap(), 0.5);
        assert_eq!(m.predict_one(&[0, 0], 0).unwrap(), 0.5);
    }

    #[test]
    fn empty_sequence_uses_zero_representation() {
        let m = init_weights(Dims::new(6, 3, 2), 9).unwrap();
        let cache = m.forward(&[0, 0, 0], 0, Mode::Eval, &mut rng0()).unwrap();
        assert_eq!(cache.representation(), &[0.0; 4]);
        let d = m.dims().dense;
        let hidden: Vec<f64> = (0..d).map(|j| m.fc1_b()[j].max(0.0)).collect();
        let logit = m.fc2_b() + m.fc2_w().iter().zip(&hidden).map(|(w, x)| w * x).sum::<f64>();
        assert_eq!(cache.probability, sigmoid(logit));
    }

    #[test]
    fn out_of_vocab_id_is_error() {
        let m = BiLstmModel::zeros(Dims::new(4, 2, 2)).unwrap();
        assert!(m.forward(&[1, 4], 2, Mode::Eval, &mut rng0()).is_err());
        assert!(m.forward(&[1], 2, Mode::Eval, &mut rng0()).is_err());
        // ids past the true length are never read
        assert!(m.forward(&[1, 99], 1, Mode::Eval, &mut rng0()).is_ok());
    }

    #[test]
    fn appended_padding_does_not_change_output() {
        let m = init_weights(Dims::new(10, 4, 3), 3).unwrap();
        let base = [5u32, 2, 9, 7];
        let p0 = m.predict_one(&base, 4).unwrap();
        for extra in 1..5 {
            let mut ids = base.to_vec();
            ids.extend(std::iter::repeat_n(PAD_ID, extra));
            assert_eq!(m.predict_one(&ids, 4).unwrap(), p0);
        }
    }

    #[test]
    fn pad_row_gradient_is_zero_and_scaling_is_linear() {
        let m = init_weights(Dims::new(10, 4, 3), 5).unwrap();
        let cache = m.forward(&[3, 1, 4, 0, 0], 3, Mode::Eval, &mut rng0()).unwrap();
        let g1 = m.backward(&cache, Label::Ai);
        assert!(g1.embedding.iter().all(|(id, _)| *id != PAD_ID));
        let flat1 = g1.to_flat(m.layout(), 4);
        assert!(flat1[..4].iter().all(|&x| x == 0.0));
        let flat2 = m.backward_scaled(&cache, Label::Ai, 2.0).to_flat(m.layout(), 4);
        for (a, b) in flat1.iter().zip(&flat2) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn dropout_rules() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(dropout(&v, 0.0, &mut rng0(), Mode::Train { dropout: 0.0 }).unwrap(), v);
        assert_eq!(dropout(&v, 0.7, &mut rng0(), Mode::Eval).unwrap(), v);
        assert!(dropout(&v, 1.0, &mut rng0(), Mode::Eval).is_err());
        assert!(dropout(&v, -0.1, &mut rng0(), Mode::Eval).is_err());
        let out = dropout(&v, 0.5, &mut rng0(), Mode::Train { dropout: 0.5 }).unwrap();
        for (o, x) in out.iter().zip(&v) {
            assert!(*o == 0.0 || *o == 2.0 * x);
        }
    }

    #[test]
    fn eval_mode_is_repeatable() {
        let m = init_weights(Dims::new(12, 3, 2), 8).unwrap();
        let a = m.predict_one(&[4, 5, 6], 3).unwrap();
        let b = m.predict_one(&[4, 5, 6], 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
