//! Hand-written neural primitives: matrix math, the LSTM cell, softmax and
//! cross-entropy, Adam, and finite-difference gradient checking. All math is
//! `f64` and single-threaded so training runs are bit-reproducible.

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod matrix;
pub mod ops;

pub use adam::{clip_global_norm, lr_schedule, AdamState};
pub use gradcheck::{grad_check, grad_check_errors, relative_error};
pub use lstm::{
    lstm_step, lstm_step_backward, lstm_step_cached, LstmParams, LstmStepCache, DEFAULT_HIDDEN,
};
pub use matrix::{dot, Matrix};
pub use ops::{
    argmax, cross_entropy, sample_categorical, sigmoid, softmax_ce_grad,
    softmax_with_temperature, PROB_FLOOR,
};

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// A model's named parameter tensors in a fixed traversal order. Drives the
/// optimizer, gradient clipping, checkpointing, and parameter flattening for
/// gradient checks.
pub trait Tensors {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>);

    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        self.visit_mut("", &mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `(name, offset, len)` of each tensor inside the flattened vector.
    fn flat_layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (name, t) in self.tensors() {
            out.push((name, offset, t.len()));
            offset += t.len();
        }
        out
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    fn set_from_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter vector length");
    }

    fn zero_all(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

impl Tensors for LstmParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        for k in 0..4 {
            out.push((join_name(prefix, &format!("w_{}", lstm::GATE_NAMES[k])), &self.w[k]));
        }
        for k in 0..4 {
            out.push((join_name(prefix, &format!("u_{}", lstm::GATE_NAMES[k])), &self.u[k]));
        }
        for k in 0..4 {
            out.push((join_name(prefix, &format!("b_{}", lstm::GATE_NAMES[k])), &self.b[k]));
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        let [w0, w1, w2, w3] = &mut self.w;
        let [u0, u1, u2, u3] = &mut self.u;
        let [b0, b1, b2, b3] = &mut self.b;
        for (k, t) in [w0, w1, w2, w3].into_iter().enumerate() {
            out.push((join_name(prefix, &format!("w_{}", lstm::GATE_NAMES[k])), t));
        }
        for (k, t) in [u0, u1, u2, u3].into_iter().enumerate() {
            out.push((join_name(prefix, &format!("u_{}", lstm::GATE_NAMES[k])), t));
        }
        for (k, t) in [b0, b1, b2, b3].into_iter().enumerate() {
            out.push((join_name(prefix, &format!("b_{}", lstm::GATE_NAMES[k])), t));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstm_flat_round_trip_preserves_params() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::uniform(3, 5, 0.4, &mut rng);
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.param_count());
        let mut q = LstmParams::zeros(3, 5);
        q.set_from_flat(&flat);
        assert_eq!(p, q);

        let layout = p.flat_layout();
        assert_eq!(layout.len(), 12);
        assert_eq!(layout[0].0, "w_i");
        let total: usize = layout.iter().map(|(_, _, n)| n).sum();
        assert_eq!(total, flat.len());
    }
}
