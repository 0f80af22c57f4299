//! Continuous Mountain-Car with a velocity-proportional friction term.
//!
//! Unit time step, constants folded into the update as in the classic
//! control implementation; the left wall is inelastic.

use rand::Rng;

use super::{Action, ActionSpace, Environment, MountainCarParams, StepInfo};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarState {
    pub position: f64,
    pub velocity: f64,
}

/// `ẋ ← clamp(ẋ + ζf − c·cos 3x − αẋ)`, `x ← clamp(x + ẋ)`.
pub fn step(state: CarState, force: f64, p: &MountainCarParams) -> CarState {
    let f = force.clamp(-1.0, 1.0);
    let CarState {
        mut position,
        mut velocity,
    } = state;
    velocity += p.power * f - p.slope * (3.0 * position).cos() - p.friction * velocity;
    velocity = velocity.clamp(-p.max_speed, p.max_speed);
    position = (position + velocity).clamp(p.min_position, p.max_position);
    if position == p.min_position && velocity < 0.0 {
        velocity = 0.0;
    }
    CarState { position, velocity }
}

/// Bottom of the valley, where the slope term vanishes.
pub fn valley() -> f64 {
    -std::f64::consts::FRAC_PI_6
}

pub fn encode(state: CarState, p: &MountainCarParams, out: &mut Vec<f64>) {
    out.push(state.position);
    out.push(state.velocity * p.velocity_scale);
}

pub struct MountainCar {
    params: MountainCarParams,
    state: CarState,
}

impl MountainCar {
    pub fn new(params: MountainCarParams) -> Self {
        Self {
            params,
            state: CarState {
                position: valley(),
                velocity: 0.0,
            },
        }
    }

    pub fn state(&self) -> CarState {
        self.state
    }
}

impl Environment for MountainCar {
    fn kind(&self) -> &'static str {
        "mountain_car"
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Interval {
            low: -1.0,
            high: 1.0,
        }
    }

    fn obs_dim(&self) -> usize {
        2
    }

    /// Uniform over the whole state box.
    fn reset(&mut self, seed: u64) {
        let mut rng = seed::rng(seed);
        let p = &self.params;
        self.state = CarState {
            position: rng.random_range(p.min_position..=p.max_position),
            velocity: rng.random_range(-p.max_speed..=p.max_speed),
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
