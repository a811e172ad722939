use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Moment buffers and hyper-parameters for Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`, with beta1 = 0.9, beta2 = 0.999,
    /// epsilon = 1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &[Tensor], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One Adam update with bias correction and decoupled weight decay:
///
/// `p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)`
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate {lr} must be > 0")));
    }
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::LengthMismatch(params.len(), grads.len()));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (j, (pj, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *pj -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *pj);
        }
    }
    Ok(())
}

/// Cosine annealing with warm restarts every `period` steps, floor 0:
/// `base_lr * (1 + cos(pi * (step mod period) / period)) / 2`.
pub fn cosine_annealing_lr(step: usize, period: usize, base_lr: f64) -> Result<f64> {
    if period == 0 {
        return Err(Error::InvalidArgument("cosine period must be > 0".into()));
    }
    let phase = (step % period) as f64 / period as f64;
    Ok(base_lr * (1.0 + (PI * phase).cos()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        // m_hat = g, v_hat = g^2 on the first step.
        let lr = 1e-5;
        let mut p = vec![Tensor::scalar(0.0)];
        let g = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, lr, 0.0).unwrap();
        let expected = -lr * 1.0 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-8 * lr);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut p = vec![Tensor::vector(vec![1.5, -2.0])];
        let g = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut st, 1e-3, 0.0).unwrap();
        }
        assert_eq!(p[0].data(), &[1.5, -2.0]);
    }

    #[test]
    fn decay_shrinks_toward_zero() {
        let mut p = vec![Tensor::vector(vec![2.0])];
        let g = vec![Tensor::zeros(&[1])];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 0.1, 0.5).unwrap();
        assert!((p[0].data()[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_shape_mismatch_and_bad_lr() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(&p);
        let g = vec![Tensor::zeros(&[3])];
        assert!(adam_step(&mut p, &g, &mut st, 1e-3, 0.0).is_err());
        let g = vec![Tensor::zeros(&[2])];
        assert!(adam_step(&mut p, &g, &mut st, 0.0, 0.0).is_err());
    }

    #[test]
    fn cosine_schedule_points() {
        assert_eq!(cosine_annealing_lr(0, 50, 1e-3).unwrap(), 1e-3);
        assert!((cosine_annealing_lr(25, 50, 1e-3).unwrap() - 5e-4).abs() < 1e-18);
        assert!(cosine_annealing_lr(49, 50, 1e-3).unwrap() < 1e-5);
        // restart
        assert_eq!(cosine_annealing_lr(50, 50, 1e-3).unwrap(), 1e-3);
        assert!(cosine_annealing_lr(3, 0, 1e-3).is_err());
    }
}
