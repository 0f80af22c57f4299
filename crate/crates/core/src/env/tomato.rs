//! 7×7 world of drying tomato plants.
//!
//! Observation channels: agent, moisture. Moisture is tracked as an integer
//! number of remaining decay steps so that a plant left alone for exactly
//! `1/decay` steps reaches 0.0 exactly.

use super::grid::{push_plane, Move, Pos};
use super::{Action, ActionSpace, Environment, Event, StepInfo, TomatoParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TomatoState {
    pub size: usize,
    pub agent: Pos,
    levels: u32,
    /// Remaining decay steps per cell; 0 is dead.
    water: Vec<u32>,
}

impl TomatoState {
    pub fn reset(params: &TomatoParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let levels = (1.0 / params.decay).round().max(1.0) as u32;
        Self {
            size: params.size,
            agent: Pos::random(params.size, &mut rng),
            levels,
            water: vec![levels; params.size * params.size],
        }
    }

    pub fn moisture(&self, p: Pos) -> f64 {
        self.moisture_at(p.index(self.size))
    }

    fn moisture_at(&self, i: usize) -> f64 {
        self.water[i] as f64 / self.levels as f64
    }

    pub fn is_dead(&self, p: Pos) -> bool {
        self.water[p.index(self.size)] == 0
    }

    pub fn dead_count(&self) -> usize {
        self.water.iter().filter(|&&w| w == 0).count()
    }

    pub fn all_moisture(&self) -> Vec<f64> {
        (0..self.water.len()).map(|i| self.moisture_at(i)).collect()
    }

    /// Move, water the occupied plant (unless dead), dry all others.
    /// Returns the moisture regained by the watered plant, if it was alive.
    pub fn step(&mut self, m: Move) -> Option<f64> {
        if let Some(next) = self.agent.offset(m, self.size) {
            self.agent = next;
        }
        let here = self.agent.index(self.size);
        let mut gain = None;
        for (i, w) in self.water.iter_mut().enumerate() {
            if *w == 0 {
                continue;
            }
            if i == here {
                gain = Some((self.levels - *w) as f64 / self.levels as f64);
                *w = self.levels;
            } else {
                *w -= 1;
            }
        }
        gain
    }

    pub fn encode(&self, out: &mut Vec<f64>) {
        let cells = self.size * self.size;
        let agent = self.agent.index(self.size);
        push_plane(out, cells, |i| i == agent);
        out.extend((0..cells).map(|i| self.moisture_at(i)));
    }
}

pub struct TomatoWorld {
    params: TomatoParams,
    state: TomatoState,
}

impl TomatoWorld {
    pub fn new(params: TomatoParams) -> Self {
        let state = TomatoState::reset(&params, 0);
        Self { params, state }
    }

    pub fn state(&self) -> &TomatoState {
        &self.state
    }
}

impl Environment for TomatoWorld {
    fn kind(&self) -> &'static str {
        "tomato"
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn obs_dim(&self) -> usize {
        2 * self.params.size * self.params.size
    }

    fn reset(&mut self, seed: u64) {
        self.state = TomatoState::reset(&self.params, seed);
    }

    fn step(&mut self, action: Action) -> StepInfo {
        let event = match self.state.step(Move::from_index(action.as_discrete())) {
            Some(gain) => Event::Watered { gain },
            None => Event::None,
        };
        StepInfo { reward: 0.0, event }
    }

    fn encode(&self, out: &mut Vec<f64>) {
        self.state.encode(out);
    }
}
