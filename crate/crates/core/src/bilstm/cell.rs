use crate::error::{Error, Result};
use crate::logreg::sigmoid;

/// Borrowed view of one direction's weights. `w` is 4H×E and `u` is 4H×H,
/// both row-major; rows are grouped by gate in [i, f, g, o] order.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams<'_> {
    fn check(&self) -> Result<()> {
        let h4 = 4 * self.hidden;
        if self.w.len() != h4 * self.input || self.u.len() != h4 * self.hidden || self.b.len() != h4 {
            return Err(Error::DimMismatch(format!(
                "LSTM block sizes w={} u={} b={} do not match H={} E={}",
                self.w.len(),
                self.u.len(),
                self.b.len(),
                self.hidden,
                self.input
            )));
        }
        Ok(())
    }
}

/// Activations of one time step.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StepCache {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn step(p: &LstmParams<'_>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let hd = p.hidden;
    let mut pre = p.b.to_vec();
    for (r, a) in pre.iter_mut().enumerate() {
        let wr = &p.w[r * p.input..(r + 1) * p.input];
        let ur = &p.u[r * hd..(r + 1) * hd];
        *a += wr.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        *a += ur.iter().zip(h_prev).map(|(u, v)| u * v).sum::<f64>();
    }
    let i: Vec<f64> = pre[..hd].iter().map(|&z| sigmoid(z)).collect();
    let f: Vec<f64> = pre[hd..2 * hd].iter().map(|&z| sigmoid(z)).collect();
    let g: Vec<f64> = pre[2 * hd..3 * hd].iter().map(|z| z.tanh()).collect();
    let o: Vec<f64> = pre[3 * hd..].iter().map(|&z| sigmoid(z)).collect();
    let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// Gradient buffers for one direction, laid out like [`LstmParams`].
pub(crate) struct BlockGrads<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Reverse one step. Accumulates parameter gradients, writes the input
/// gradient into `dx`, and returns (dh_prev, dc_prev).
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_backward(
    p: &LstmParams<'_>,
    cache: &StepCache,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    dh: &[f64],
    dc_next: &[f64],
    grads: &mut BlockGrads<'_>,
    dx: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden;
    let mut da = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let dc = dc_next[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
        let d_o = dh[k] * cache.tanh_c[k];
        let d_i = dc * cache.g[k];
        let d_g = dc * cache.i[k];
        let d_f = dc * c_prev[k];
        dc_prev[k] = dc * cache.f[k];
        da[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
        da[hd + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
        da[2 * hd + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
        da[3 * hd + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
    }
    let mut dh_prev = vec![0.0; hd];
    dx.fill(0.0);
    for (r, &d) in da.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grads.b[r] += d;
        let wr = &p.w[r * p.input..(r + 1) * p.input];
        let gw = &mut grads.w[r * p.input..(r + 1) * p.input];
        for k in 0..p.input {
            gw[k] += d * x[k];
            dx[k] += d * wr[k];
        }
        let ur = &p.u[r * hd..(r + 1) * hd];
        let gu = &mut grads.u[r * hd..(r + 1) * hd];
        for k in 0..hd {
            gu[k] += d * h_prev[k];
            dh_prev[k] += d * ur[k];
        }
    }
    (dh_prev, dc_prev)
}

/// One LSTM step: returns (h, c).
///
/// i = σ(Wᵢx + Uᵢh + bᵢ), f = σ(W_f x + U_f h + b_f), g = tanh(W_g x + U_g h + b_g),
/// o = σ(W_o x + U_o h + b_o), c = f⊙c_prev + i⊙g, h = o⊙tanh(c).
pub fn lstm_cell(x: &[f64], h_prev: &[f64], c_prev: &[f64], params: &LstmParams<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check()?;
    if x.len() != params.input || h_prev.len() != params.hidden || c_prev.len() != params.hidden {
        return Err(Error::DimMismatch(format!(
            "cell inputs x={} h={} c={} for E={} H={}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            params.input,
            params.hidden
        )));
    }
    let s = step(params, x, h_prev, c_prev);
    Ok((s.h, s.c))
}
