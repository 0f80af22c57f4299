use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: `wd·θ` is added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, model: &MlpModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn matches(&self, model: &MlpModel) -> bool {
        self.first.len() == model.layers.len() * 2
            && model
                .tensors()
                .zip(self.first.iter().zip(&self.second))
                .all(|(t, (m, v))| t.len() == m.len() && t.len() == v.len())
    }
}

/// One bias-corrected Adam update of `model` in place.
pub fn adam_step(model: &mut MlpModel, state: &mut AdamState, grads: &Gradients) {
    assert!(state.matches(model), "optimizer state does not match the model");
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let correct1 = 1.0 - c.beta1.powi(t);
    let correct2 = 1.0 - c.beta2.powi(t);
    for (((theta, g), m), v) in model
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        for i in 0..theta.len() {
            let gi = g[i] + c.weight_decay * theta[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            let mhat = m[i] / correct1;
            let vhat = v[i] / correct2;
            theta[i] -= c.lr * mhat / (vhat.sqrt() + c.eps);
        }
    }
}
