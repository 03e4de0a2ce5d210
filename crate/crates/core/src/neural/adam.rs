use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, IxDyn, NdFloat, Zip};

use super::cst;
use crate::error::{Error, Result};

/// Adam hyperparameters. `weight_decay` is an L2 term added to the gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

impl AdamConfig {
    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }

    pub fn with_weight_decay(self, weight_decay: f64) -> Self {
        Self { weight_decay, ..self }
    }
}

/// Per-tensor moment estimates for one parameter group.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    config: AdamConfig,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
    step: u64,
}

impl<F: NdFloat> AdamState<F> {
    pub fn new<S: AsRef<[usize]>>(config: AdamConfig, shapes: &[S]) -> Self {
        let zeros = || shapes.iter().map(|s| ArrayD::zeros(IxDyn(s.as_ref()))).collect();
        Self { config, m: zeros(), v: zeros(), step: 0 }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Bytes held by the two moment buffers.
    pub fn bytes(&self) -> usize {
        2 * self.m.iter().map(ArrayD::len).sum::<usize>() * std::mem::size_of::<F>()
    }

    /// One bias-corrected update. Gradients are checked before anything is
    /// modified, so a non-finite gradient leaves parameters and state intact.
    pub fn step(&mut self, params: &mut [ArrayViewMutD<'_, F>], grads: &[ArrayViewD<'_, F>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.m[i].shape() || g.shape() != self.m[i].shape() {
                return Err(Error::Shape(format!("tensor {i}: parameter/gradient shape mismatch")));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of tensor {i} is not finite")));
            }
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let (b1, b2) = (cst::<F>(c.beta1), cst::<F>(c.beta2));
        let (one_b1, one_b2) = (cst::<F>(1.0 - c.beta1), cst::<F>(1.0 - c.beta2));
        let bc1 = cst::<F>(1.0 - c.beta1.powi(t));
        let bc2 = cst::<F>(1.0 - c.beta2.powi(t));
        let (lr, eps, wd) = (cst::<F>(c.lr), cst::<F>(c.eps), cst::<F>(c.weight_decay));
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            Zip::from(p).and(g).and(&mut self.m[i]).and(&mut self.v[i]).for_each(|p, &g, m, v| {
                let g = g + wd * *p;
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
