//! Scalar activations, the temperature softmax, cross-entropy, and the
//! categorical sampler shared by both sequence models.

use crate::error::{Error, Result};
use rand::Rng;

/// Probabilities below this floor are clamped before taking logs so that a
/// saturated softmax cannot produce an infinite loss.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax of `logits / tau` with max-subtraction for stability.
///
/// `tau` must be finite and strictly positive; the output sums to 1 within
/// floating-point error for any finite logits.
pub fn softmax_with_temperature(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax over empty logits"));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::invalid(format!(
            "temperature must be finite and > 0, got {tau}"
        )));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| ((z - max) / tau).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// Negative log-likelihood of `target` under `probs`, with the probability
/// floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    if target >= probs.len() {
        return Err(Error::invalid(format!(
            "cross-entropy target {} out of range for {} classes",
            target,
            probs.len()
        )));
    }
    Ok(-probs[target].max(PROB_FLOOR).ln())
}

/// Fused softmax (at temperature 1) and cross-entropy used by the training
/// loops. Returns the loss and `d loss / d logits = p - onehot(target)`.
pub fn softmax_ce_grad(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let probs = softmax_with_temperature(logits, 1.0)?;
    let loss = cross_entropy(&probs, target)?;
    let mut grad = probs;
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Draws an index from a normalized probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if r < cum {
            return i;
        }
    }
    probs.len() - 1
}
