//! Gated LSTM cell with hand-written forward and backward passes.
//!
//! Gate equations, with `s` the logistic function:
//!
//! ```text
//! i = s(W_i x + U_i h_prev + b_i)        input gate
//! f = s(W_f x + U_f h_prev + b_f)        forget gate
//! o = s(W_o x + U_o h_prev + b_o)        output gate
//! g = tanh(W_g x + U_g h_prev + b_g)     candidate state
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use super::matrix::Matrix;
use super::ops::sigmoid;
use crate::error::{Error, Result};
use rand::Rng;

/// Default hidden width for both the lyrics model and the melody network.
pub const DEFAULT_HIDDEN: usize = 128;

pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];

/// One cell's parameters. `w[k]` maps the input, `u[k]` the previous hidden
/// state, and `b[k]` is the bias of gate `k` in the order `i, f, o, g`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub d_in: usize,
    pub d_h: usize,
    pub w: [Matrix; 4],
    pub u: [Matrix; 4],
    pub b: [Matrix; 4],
}

impl LstmParams {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        LstmParams {
            d_in,
            d_h,
            w: std::array::from_fn(|_| Matrix::zeros(d_h, d_in)),
            u: std::array::from_fn(|_| Matrix::zeros(d_h, d_h)),
            b: std::array::from_fn(|_| Matrix::zeros(d_h, 1)),
        }
    }

    /// Weights drawn uniformly from `[-scale, scale)`, biases zero.
    pub fn uniform(d_in: usize, d_h: usize, scale: f64, rng: &mut impl Rng) -> Self {
        LstmParams {
            d_in,
            d_h,
            w: std::array::from_fn(|_| Matrix::uniform(d_h, d_in, -scale, scale, rng)),
            u: std::array::from_fn(|_| Matrix::uniform(d_h, d_h, -scale, scale, rng)),
            b: std::array::from_fn(|_| Matrix::zeros(d_h, 1)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.d_in, self.d_h)
    }

    fn check_step_inputs(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        if x.len() != self.d_in {
            return Err(Error::shape(format!(
                "lstm input has {} entries, cell expects {}",
                x.len(),
                self.d_in
            )));
        }
        if h_prev.len() != self.d_h || c_prev.len() != self.d_h {
            return Err(Error::shape(format!(
                "lstm state has {}/{} entries, cell expects {}",
                h_prev.len(),
                c_prev.len(),
                self.d_h
            )));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gate values in the order `i, f, o, g`.
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmStepCache {
    pub fn h(&self) -> Vec<f64> {
        self.gates[2]
            .iter()
            .zip(&self.tanh_c)
            .map(|(o, t)| o * t)
            .collect()
    }
}

/// One recurrence step. Returns `(h, c)`.
pub fn lstm_step(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = lstm_step_cached(p, x, h_prev, c_prev)?;
    Ok((cache.h(), cache.c))
}

/// One recurrence step that also returns the activation cache for backprop.
pub fn lstm_step_cached(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<LstmStepCache> {
    p.check_step_inputs(x, h_prev, c_prev)?;
    let mut gates: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; p.d_h]);
    for k in 0..4 {
        let z = &mut gates[k];
        z.copy_from_slice(p.b[k].data());
        p.w[k].mul_vec_acc(x, z);
        p.u[k].mul_vec_acc(h_prev, z);
        if k == 3 {
            for v in z.iter_mut() {
                *v = v.tanh();
            }
        } else {
            for v in z.iter_mut() {
                *v = sigmoid(*v);
            }
        }
    }
    let c: Vec<f64> = (0..p.d_h)
        .map(|n| gates[1][n] * c_prev[n] + gates[0][n] * gates[3][n])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    Ok(LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
    })
}

/// Reverse-mode step. `dh` and `dc` are the gradients flowing into this
/// step's `h` and `c`; parameter gradients accumulate into `grads` and the
/// returned triple is `(dx, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    p: &LstmParams,
    grads: &mut LstmParams,
    cache: &LstmStepCache,
    dh: &[f64],
    dc: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = p.d_h;
    let (i, f, o, g) = (
        &cache.gates[0],
        &cache.gates[1],
        &cache.gates[2],
        &cache.gates[3],
    );

    // Total gradient on c: direct dc plus dh routed through h = o * tanh(c).
    let mut dct = vec![0.0; d];
    for n in 0..d {
        dct[n] = dc[n] + dh[n] * o[n] * (1.0 - cache.tanh_c[n] * cache.tanh_c[n]);
    }

    // Pre-activation gate gradients.
    let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d]);
    for n in 0..d {
        dz[0][n] = dct[n] * g[n] * i[n] * (1.0 - i[n]);
        dz[1][n] = dct[n] * cache.c_prev[n] * f[n] * (1.0 - f[n]);
        dz[2][n] = dh[n] * cache.tanh_c[n] * o[n] * (1.0 - o[n]);
        dz[3][n] = dct[n] * i[n] * (1.0 - g[n] * g[n]);
    }

    let mut dx = vec![0.0; p.d_in];
    let mut dh_prev = vec![0.0; d];
    let mut dc_prev = vec![0.0; d];
    for n in 0..d {
        dc_prev[n] = dct[n] * f[n];
    }
    for k in 0..4 {
        grads.w[k].add_outer(&dz[k], &cache.x);
        grads.u[k].add_outer(&dz[k], &cache.h_prev);
        for (b, z) in grads.b[k].data_mut().iter_mut().zip(&dz[k]) {
            *b += z;
        }
        p.w[k].mul_t_vec_acc(&dz[k], &mut dx);
        p.u[k].mul_t_vec_acc(&dz[k], &mut dh_prev);
    }
    (dx, dh_prev, dc_prev)
}
