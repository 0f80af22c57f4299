//! Damped pendulum, semi-implicit Euler.

use std::f64::consts::PI;

use rand::Rng;

use super::{Action, ActionSpace, Environment, PendulumParams, StepInfo};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `θ̈ = −(3g/2l) sin θ + 3τ/(ml²) − αθ̇`, velocity updated first.
pub fn step(state: PendulumState, torque: f64, p: &PendulumParams) -> PendulumState {
    let tau = torque.clamp(-p.max_torque, p.max_torque);
    let acc = -3.0 * p.gravity / (2.0 * p.length) * state.theta.sin()
        + 3.0 * tau / (p.mass * p.length * p.length)
        - p.friction * state.theta_dot;
    let theta_dot = (state.theta_dot + acc * p.dt).clamp(-p.max_speed, p.max_speed);
    PendulumState {
        theta: wrap_angle(state.theta + theta_dot * p.dt),
        theta_dot,
    }
}

/// `(cos θ, sin θ, θ̇)`.
pub fn encode(state: PendulumState, p: &PendulumParams, out: &mut Vec<f64>) {
    out.push(state.theta.cos());
    out.push(state.theta.sin());
    out.push(state.theta_dot * p.velocity_scale);
}

pub struct Pendulum {
    params: PendulumParams,
    state: PendulumState,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Self {
        Self {
            params,
            state: PendulumState {
                theta: 0.0,
                theta_dot: 0.0,
            },
        }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }
}

impl Environment for Pendulum {
    fn kind(&self) -> &'static str {
        "pendulum"
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Interval {
            low: -self.params.max_torque,
            high: self.params.max_torque,
        }
    }

    fn obs_dim(&self) -> usize {
        3
    }

    /// `θ ~ U(−π, π]`, `θ̇ ~ U[−1, 1]`.
    fn reset(&mut self, seed: u64) {
        let mut rng = seed::rng(seed);
        self.state = PendulumState {
            theta: wrap_angle(rng.random_range(-PI..=PI)),
            theta_dot: rng.random_range(-1.0..=1.0),
        };
    }

    fn step(&mut self, action: Action) -> StepInfo {
        self.state = step(self.state, action.as_continuous(), &self.params);
        StepInfo::default()
    }

    fn encode(&self, out: &mut Vec<f64>) {
        encode(self.state, &self.params, out);
    }
}
