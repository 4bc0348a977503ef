//! Adam with bias correction. Moments are kept in f64; parameters are
//! written back at their own precision.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::{sqrt, Real};

/// First/second moment estimates for a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// Completed steps; bias correction uses `t + 1` on the next call.
    pub t: u64,
}

impl AdamState {
    /// Zero state shaped like the given parameter tensors.
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    /// One update step: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step<R: Real>(
        &mut self,
        params: &mut [&mut Vec<R>],
        grads: &[Vec<f64>],
        lr: f64,
        betas: (f64, f64),
        eps: f64,
    ) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let (b1, b2) = betas;
        let bc1 = 1.0 - pow(b1, self.t);
        let bc2 = 1.0 - pow(b2, self.t);
        for (ti, grad) in grads.iter().enumerate() {
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            let p = &mut params[ti];
            debug_assert_eq!(grad.len(), p.len());
            for (i, &g) in grad.iter().enumerate() {
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let x = p[i].to_f64() - lr * m_hat / (sqrt(v_hat) + eps);
                p[i] = R::from_f64(x);
            }
        }
    }
}

fn pow(base: f64, exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut base = base;
    let mut exp = exp;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    const BETAS: (f64, f64) = (0.9, 0.999);
    const EPS: f64 = 1e-8;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f64, -2.0, 3.0];
        let mut state = AdamState::new(&[3]);
        state.step(&mut [&mut p], &[vec![0.0; 3]], 1e-3, BETAS, EPS);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn single_step_closed_form() {
        // from zero state with g = 1: m_hat = 1, v_hat = 1,
        // delta = -lr / (1 + eps)
        let mut p = vec![0.0f64];
        let mut state = AdamState::new(&[1]);
        state.step(&mut [&mut p], &[vec![1.0]], 1e-3, BETAS, EPS);
        let expect = -1e-3 / (1.0 + EPS);
        assert!((p[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = vec![5.0f32, 5.0];
        let mut state = AdamState::new(&[2]);
        state.step(&mut [&mut p], &[vec![0.37, 0.37]], 1e-3, BETAS, EPS);
        assert_eq!(p[0], p[1]);
        assert!(p[0] < 5.0);
    }

    #[test]
    fn bias_correction_uses_step_count() {
        let mut p = vec![0.0f64];
        let mut state = AdamState::new(&[1]);
        for _ in 0..3 {
            state.step(&mut [&mut p], &[vec![1.0]], 1e-3, BETAS, EPS);
        }
        assert_eq!(state.t, 3);
        // constant unit gradient keeps m_hat = 1, v_hat = 1 at every step
        let expect = -3e-3 / (1.0 + EPS);
        assert!((p[0] - expect).abs() < 1e-12);
    }
}
