use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Steps at which the learning rate is divided by `decay`.
    pub milestones: Vec<usize>,
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            milestones: Vec::new(),
            decay: 10.0,
        }
    }
}

/// Bias-corrected Adam with a piecewise-constant learning-rate schedule.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    step: usize,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Learning rate used by the step with zero-based index `k`.
    pub fn lr_at(&self, k: usize) -> f64 {
        let passed = self.config.milestones.iter().filter(|&&m| m <= k).count();
        self.config.lr / self.config.decay.powi(passed as i32)
    }

    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                iteration: self.step,
                what: "gradient",
            });
        }
        let lr = self.lr_at(self.step);
        self.step += 1;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let c1 = T::lit(1.0 - b1.powi(self.step as i32));
        let c2 = T::lit(1.0 - b2.powi(self.step as i32));
        let (b1, b2, eps, lr) = (T::lit(b1), T::lit(b2), T::lit(self.config.eps), T::lit(lr));
        let one = T::one();
        for ((t, &g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *t -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
