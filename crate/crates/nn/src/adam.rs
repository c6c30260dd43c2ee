//! Adam with an exponentially decaying learning rate.

use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::{NnError, Result};

/// `l(i) = l₀ · C^(i/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub decay_steps: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 2e-4, decay: 0.96, decay_steps: 1000.0 }
    }
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self { initial: lr, decay: 1.0, decay_steps: 1.0 }
    }

    pub fn rate(&self, step: u64) -> f64 {
        self.initial * self.decay.powf(step as f64 / self.decay_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.5, beta2: 0.5, eps: 1e-7, schedule: LrSchedule::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, m: vec![], v: vec![], step: 0 }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place from `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(NnError::Shape {
                layer: 0,
                kind: "adam",
                msg: format!("{} parameters but {} gradients", params.len(), grads.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFinite(format!("gradient {i} = {}", grads[i])));
        }
        if self.m.is_empty() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
        } else if self.m.len() != params.len() {
            return Err(NnError::Shape {
                layer: 0,
                kind: "adam",
                msg: format!("optimizer state holds {} moments, got {} parameters", self.m.len(), params.len()),
            });
        }
        let AdamConfig { beta1, beta2, eps, schedule } = self.config;
        let lr = schedule.rate(self.step);
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }

    /// One step on a network's accumulated gradients; gradients are left
    /// untouched.
    pub fn step(&mut self, net: &mut Network) -> Result<()> {
        let grads = net.grads();
        let mut params = net.params();
        self.update(&mut params, &grads)?;
        net.set_params(&params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_constants() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(0), 2e-4);
        assert!((s.rate(1000) - 1.92e-4).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![1.0, -2.0];
        adam.update(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // decaying step size so the oscillation about the minimum dies out
        let schedule = LrSchedule { initial: 0.01, decay: 0.01, decay_steps: 1000.0 };
        let cfg = AdamConfig { schedule, ..AdamConfig::default() };
        let mut adam = Adam::new(cfg);
        let mut w = [1.0];
        for _ in 0..2000 {
            let g = [2.0 * w[0]];
            adam.update(&mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 1e-3, "{}", w[0]);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut adam = Adam::new(AdamConfig::default());
        assert!(matches!(adam.update(&mut [0.0], &[f64::NAN]), Err(NnError::NonFinite(_))));
    }
}
