//! Environment simulators.
//!
//! Every simulator implements [`Environment`] and is constructed by name
//! through the [`EnvRegistry`]. All randomness an environment needs (layout
//! sampling, process noise, noise channels) comes from a generator it owns and
//! that [`Environment::reset`] reseeds, so a `(config, seed, actions)` triple
//! always replays bit-identically.

pub mod augment;
mod config;
mod grid;
pub mod mountain_car;
pub mod ou;
pub mod pendulum;
mod registry;
pub mod sokoban;
pub mod tomato;
pub mod vases;

pub use augment::AugmentKind;
pub use config::{
    EnvConfig, MountainCarParams, OuParams, PendulumParams, SokobanParams, TomatoParams,
    VaseParams,
};
pub use grid::{Move, Pos};
pub use registry::{EnvFactory, EnvRegistry};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Interval { low: f64, high: f64 },
}

impl ActionSpace {
    /// Uniform draw from the space (the random reference policy).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match *self {
            ActionSpace::Discrete(n) => Action::Discrete(rng.random_range(0..n)),
            ActionSpace::Interval { low, high } => Action::Continuous(rng.random_range(low..=high)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

impl Action {
    pub fn as_discrete(self) -> usize {
        match self {
            Action::Discrete(a) => a,
            Action::Continuous(x) => x as usize,
        }
    }

    pub fn as_continuous(self) -> f64 {
        match self {
            Action::Discrete(a) => a as f64,
            Action::Continuous(x) => x,
        }
    }
}

/// Ground-truth annotation of a transition, as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Event {
    #[default]
    None,
    VaseBroken,
    /// The agent stood on a live plant; `gain` is the moisture it regained.
    Watered { gain: f64 },
    BoxPushed { against_wall: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub reward: f64,
    pub event: Event,
}

pub trait Environment: Send {
    /// Registry name of the underlying simulator.
    fn kind(&self) -> &'static str;

    fn action_space(&self) -> ActionSpace;

    /// Length of the encoded state vector.
    fn obs_dim(&self) -> usize;

    fn reset(&mut self, seed: u64);

    fn step(&mut self, action: Action) -> StepInfo;

    /// Append the learner-facing encoding of the current state to `out`.
    fn encode(&self, out: &mut Vec<f64>);

    fn observe(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.obs_dim());
        self.encode(&mut v);
        v
    }
}
