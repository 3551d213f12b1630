use serde::{Deserialize, Serialize};

use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Adam {
            config,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let correct1 = T::of(1.0 / (1.0 - c.beta1.powi(self.t as i32)));
        let correct2 = T::of(1.0 / (1.0 - c.beta2.powi(self.t as i32)));
        let (lr, eps) = (T::of(c.learning_rate), T::of(c.epsilon));
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = *m * correct1;
            let v_hat = *v * correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = Adam::<f64>::new(AdamConfig::default(), 3);
        let mut p = [1.0, 2.0, 3.0];
        opt.step(&mut p, &[1.0, 0.0, -4.0]);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        assert!((p[0] - (1.0 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(p[1], 2.0);
        assert!(p[2] > 3.0);
        assert!((p[2] - (3.0 + 1e-3 * 4.0 / (4.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn second_step_matches_hand_calculation() {
        let cfg = AdamConfig::default();
        let mut opt = Adam::<f64>::new(cfg, 1);
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]);
        opt.step(&mut p, &[0.5]);
        let m = 0.9 * 0.1 + 0.1 * 0.5;
        let v = 0.999 * 0.001 + 0.001 * 0.25;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expect = -1e-3 / (1.0 + 1e-8) - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15);
    }
}
