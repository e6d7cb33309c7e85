use serde::{Deserialize, Serialize};

use crate::policy::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: 10.0 }
    }
}

/// Scale `grad` in place so its global L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grad: &mut NetworkParams<f32>, max_norm: f64) -> f64 {
    let norm = grad.norm();
    if max_norm > 0.0 && norm > max_norm {
        grad.scale((max_norm / norm) as f32);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Adam { config, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Clip `grad` and apply one Adam step to `params`. Returns the pre-clip gradient norm.
    pub fn update(&mut self, params: &mut NetworkParams<f32>, grad: &mut NetworkParams<f32>) -> f64 {
        let norm = clip_global_norm(grad, self.config.clip_norm);
        let AdamConfig { lr, beta1, beta2, eps, .. } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let g = f64::from(g);
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let step = lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            *p = (f64::from(*p) - step) as f32;
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NetShape;

    fn shape() -> NetShape {
        NetShape { obs_len: 3, hidden: 4, skills: 3, moves: 18 }
    }

    #[test]
    fn clips_norm_100_to_10() {
        let mut g = NetworkParams::<f32>::zeros(shape());
        let n = g.len() as f32;
        for x in g.as_mut_slice() {
            *x = 100.0 / n.sqrt();
        }
        let before = clip_global_norm(&mut g, 10.0);
        assert!((before - 100.0).abs() < 1e-3);
        assert!((g.norm() - 10.0).abs() < 1e-4);
    }

    #[test]
    fn small_gradient_is_untouched() {
        let mut g = NetworkParams::<f32>::zeros(shape());
        g.as_mut_slice()[0] = 3.0;
        let copy = g.clone();
        clip_global_norm(&mut g, 10.0);
        assert_eq!(g, copy);
    }

    #[test]
    fn zero_gradient_leaves_fresh_parameters_unchanged() {
        let mut p = NetworkParams::<f32>::init(shape(), 1);
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::default(), p.len());
        let mut g = p.zeros_like();
        adam.update(&mut p, &mut g);
        assert_eq!(p, before);
        assert!(adam.m.iter().chain(&adam.v).all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = NetworkParams::<f32>::zeros(shape());
        let mut adam = Adam::new(AdamConfig { lr: 0.01, ..AdamConfig::default() }, p.len());
        let mut g = p.zeros_like();
        g.as_mut_slice()[2] = 0.5;
        g.as_mut_slice()[5] = -4.0;
        adam.update(&mut p, &mut g);
        assert!((p.as_slice()[2] + 0.01).abs() < 1e-6);
        assert!((p.as_slice()[5] - 0.01).abs() < 1e-6);
        assert_eq!(p.as_slice()[0], 0.0);
    }
}
