use serde::{Deserialize, Serialize};

use super::AugmentKind;

/// Environment selection plus the physical constants of every simulator.
///
/// Only the block matching `kind` is read by the constructed environment; the
/// rest is carried along so a single config file can drive any of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: String,
    /// Optional extra channel appended to gridworld observations.
    pub augment: Option<AugmentKind>,
    /// Episode length the clock channel is normalised by.
    pub episode_len: usize,
    pub vases: VaseParams,
    pub tomato: TomatoParams,
    pub sokoban: SokobanParams,
    pub pendulum: PendulumParams,
    pub mountain_car: MountainCarParams,
    pub ou: OuParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kind: "vases".into(),
            augment: None,
            episode_len: 128,
            vases: VaseParams::default(),
            tomato: TomatoParams::default(),
            sokoban: SokobanParams::default(),
            pendulum: PendulumParams::default(),
            mountain_car: MountainCarParams::default(),
            ou: OuParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn with_kind(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaseParams {
    pub size: usize,
    pub density: f64,
    pub step_penalty: f64,
}

impl Default for VaseParams {
    fn default() -> Self {
        Self {
            size: 7,
            density: 0.5,
            step_penalty: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomatoParams {
    pub size: usize,
    /// Moisture lost per step by every unwatered live plant.
    pub decay: f64,
}

impl Default for TomatoParams {
    fn default() -> Self {
        Self {
            size: 7,
            decay: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SokobanParams {
    pub size: usize,
    pub boxes: usize,
    /// Wall cells scattered inside the border (connectivity is preserved).
    pub interior_walls: usize,
    /// Length of the reverse-play random walk used to scramble the level.
    pub reverse_steps: usize,
    /// Probability of pulling an adjacent box during the reverse walk.
    pub pull_prob: f64,
}

impl Default for SokobanParams {
    fn default() -> Self {
        Self {
            size: 10,
            boxes: 3,
            interior_walls: 6,
            reverse_steps: 300,
            pull_prob: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub friction: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_torque: f64,
    /// Multiplier on the angular velocity in the learner encoding.
    pub velocity_scale: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            friction: 0.1,
            dt: 0.05,
            max_speed: 8.0,
            max_torque: 2.0,
            velocity_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainCarParams {
    pub power: f64,
    pub slope: f64,
    pub friction: f64,
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    /// Multiplier on the velocity in the learner encoding.
    pub velocity_scale: f64,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        Self {
            power: 0.0015,
            slope: 0.0025,
            friction: 0.1,
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            velocity_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuParams {
    /// Per-axis gradient coefficients of the quadratic potential:
    /// `∇Ψ(x) = (k1·x1, k2·x2)`.
    pub stiffness: [f64; 2],
    /// Per-step noise amplitude `√(2/β)`.
    pub noise: f64,
    pub init_mean: [f64; 2],
    pub init_std: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            stiffness: [0.1, 0.05],
            noise: 0.3,
            init_mean: [3.0, 3.0],
            init_std: 1.0,
        }
    }
}

impl OuParams {
    /// `Ψ(x) = k1·x1²/2 + k2·x2²/2`.
    pub fn potential(&self, x: [f64; 2]) -> f64 {
        0.5 * (self.stiffness[0] * x[0] * x[0] + self.stiffness[1] * x[1] * x[1])
    }

    /// Inverse temperature implied by the noise amplitude.
    pub fn beta_inv(&self) -> f64 {
        self.noise * self.noise / 2.0
    }
}
