//! Directed reachability and the rewards shaped from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MlpModel;

/// `η(s → s') = h(s') − h(s)`.
pub fn eta(model: &MlpModel, s: &[f64], s_next: &[f64]) -> Result<f64> {
    Ok(model.forward_one(s_next)? - model.forward_one(s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Transfer {
    Identity,
    /// 1 at or above the threshold, 0 below.
    Step { threshold: f64 },
}

impl Transfer {
    pub fn apply(self, eta: f64) -> f64 {
        match self {
            Transfer::Identity => eta,
            Transfer::Step { threshold } => {
                if eta >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardShapingConfig {
    pub beta: f64,
    pub transfer: Transfer,
    pub momentum: f64,
}

impl Default for RewardShapingConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            transfer: Transfer::Identity,
            momentum: 0.95,
        }
    }
}

impl RewardShapingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// `r − β·max(σ(η), 0)`.
pub fn safety_reward(r: f64, eta: f64, config: &RewardShapingConfig) -> f64 {
    r - config.beta * config.transfer.apply(eta).max(0.0)
}

pub fn curiosity_reward(eta: f64) -> f64 {
    -eta
}

/// `−(η_t − avg_t)` with `avg_0 = η_0` and
/// `avg_t = m·avg_{t−1} + (1 − m)·η_t`.
pub fn tomato_intrinsic(etas: &[f64], momentum: f64) -> Vec<f64> {
    let mut avg = match etas.first() {
        Some(&e) => e,
        None => return Vec::new(),
    };
    etas.iter()
        .enumerate()
        .map(|(t, &e)| {
            if t > 0 {
                avg = momentum * avg + (1.0 - momentum) * e;
            }
            avg - e
        })
        .collect()
}
