//! Adam optimizer with bias correction, the stepped learning-rate schedule,
//! and global gradient-norm clipping.

use super::Tensors;
use crate::error::{Error, Result};

/// Adam moment estimates for one model. Moment buffers are kept in the
/// model's tensor traversal order, so a state must only ever be applied to
/// the model it was created from (or an identically shaped one).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &impl Tensors) -> Self {
        let shapes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut impl Tensors, grads: &impl Tensors, lr: f64) -> Result<()> {
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
        }
        let mut ps = params.tensors_mut();
        let gs = grads.tensors();
        if ps.len() != self.m.len() || gs.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state holds {} tensors, model has {}, grads have {}",
                self.m.len(),
                ps.len(),
                gs.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
            let (p, g) = (p.1.data_mut(), g.1.data());
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::shape(format!(
                    "adam tensor {k} length {} does not match state {}",
                    p.len(),
                    self.m[k].len()
                )));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for n in 0..p.len() {
                m[n] = self.beta1 * m[n] + (1.0 - self.beta1) * g[n];
                v[n] = self.beta2 * v[n] + (1.0 - self.beta2) * g[n] * g[n];
                let m_hat = m[n] / bc1;
                let v_hat = v[n] / bc2;
                p[n] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Stepped decay: the rate drops by 10% of the initial value every 10 epochs
/// and is floored at one tenth of the initial value.
pub fn lr_schedule(initial: f64, epoch: usize) -> f64 {
    let factor = 1.0 - 0.1 * (epoch / 10) as f64;
    initial * factor.max(0.1)
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut impl Tensors, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, t) in grads.tensors() {
        sq += t.data().iter().map(|g| g * g).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            for g in t.data_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use approx::assert_abs_diff_eq;

    struct One(Matrix);

    impl Tensors for One {
        fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
            out.push((super::super::join_name(prefix, "p"), &self.0));
        }
        fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
            out.push((super::super::join_name(prefix, "p"), &mut self.0));
        }
    }

    #[test]
    fn first_update_magnitude_is_learning_rate() {
        let mut params = One(Matrix::zeros(1, 1));
        let grads = One(Matrix::from_vec(1, 1, vec![0.5]).unwrap());
        let mut state = AdamState::new(&params);
        state.step(&mut params, &grads, 1e-3).unwrap();
        assert_abs_diff_eq!(params.0.get(0, 0), -1e-3, epsilon = 1e-9);
    }

    #[test]
    fn defaults_match_standard_constants() {
        let state = AdamState::new(&One(Matrix::zeros(1, 1)));
        assert_eq!(state.beta1, 0.9);
        assert_eq!(state.beta2, 0.999);
        assert_eq!(state.eps, 1e-8);
    }

    #[test]
    fn schedule_steps_down_and_floors() {
        assert_abs_diff_eq!(lr_schedule(1e-4, 0), 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(lr_schedule(1e-4, 9), 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(lr_schedule(1e-4, 10), 9e-5, epsilon = 1e-12);
        assert_abs_diff_eq!(lr_schedule(1e-4, 55), 5e-5, epsilon = 1e-12);
        assert_abs_diff_eq!(lr_schedule(1e-4, 1000), 1e-5, epsilon = 1e-12);
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut g = One(Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap());
        let norm = clip_global_norm(&mut g, 10.0);
        assert_abs_diff_eq!(norm, 5.0, epsilon = 1e-12);
        assert_eq!(g.0.data(), &[3.0, 4.0]);
        let norm = clip_global_norm(&mut g, 1.0);
        assert_abs_diff_eq!(norm, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.0.data()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(g.0.data()[1], 0.8, epsilon = 1e-12);
    }
}
