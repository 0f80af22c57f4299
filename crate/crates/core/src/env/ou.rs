//! Two-dimensional Ornstein–Uhlenbeck walker in a quadratic potential,
//! Euler–Maruyama at unit time step.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Action, ActionSpace, Environment, OuParams, StepInfo};
use crate::seed::{self, Rng as SeedRng};

/// `x ← x − ∇Ψ(x) + σ ξ`, `ξ ~ N(0, I₂)`.
pub fn step<R: Rng + ?Sized>(x: [f64; 2], p: &OuParams, rng: &mut R) -> [f64; 2] {
    let xi0: f64 = rng.sample(StandardNormal);
    let xi1: f64 = rng.sample(StandardNormal);
    [
        x[0] - p.stiffness[0] * x[0] + p.noise * xi0,
        x[1] - p.stiffness[1] * x[1] + p.noise * xi1,
    ]
}

pub fn sample_initial<R: Rng + ?Sized>(p: &OuParams, rng: &mut R) -> [f64; 2] {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [p.init_mean[0] + p.init_std * a, p.init_mean[1] + p.init_std * b]
}

/// Stationary variance of axis `i` of the discretised process,
/// `σ² / (1 − (1 − k)²)`.
pub fn stationary_variance(p: &OuParams, axis: usize) -> f64 {
    let r = 1.0 - p.stiffness[axis];
    p.noise * p.noise / (1.0 - r * r)
}

pub struct OuWalker {
    params: OuParams,
    x: [f64; 2],
    rng: SeedRng,
}

impl OuWalker {
    pub fn new(params: OuParams) -> Self {
        Self {
            params,
            x: [0.0; 2],
            rng: seed::rng(0),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        self.x
    }

    pub fn set_position(&mut self, x: [f64; 2]) {
        self.x = x;
    }
}

impl Environment for OuWalker {
    fn kind(&self) -> &'static str {
        "ou"
    }

    /// The walker is uncontrolled; the single action is a no-op.
    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(1)
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) {
        self.rng = seed::rng(seed);
        self.x = sample_initial(&self.params, &mut self.rng);
    }

    fn step(&mut self, _action: Action) -> StepInfo {
        self.x = step(self.x, &self.params, &mut self.rng);
        StepInfo::default()
    }

    fn encode(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.x);
    }
}
