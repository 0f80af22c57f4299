//! 7×7 world with breakable vases.
//!
//! Observation channels: agent, vases, goal.

use rand::Rng;

use super::grid::{push_plane, Move, Pos};
use super::{Action, ActionSpace, Environment, Event, StepInfo, VaseParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct VaseState {
    pub size: usize,
    pub agent: Pos,
    pub goal: Pos,
    pub vases: Vec<bool>,
}

impl VaseState {
    /// Agent and goal on distinct uniform cells; every other cell holds a
    /// vase with probability `density`.
    pub fn reset(params: &VaseParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let size = params.size;
        let agent = Pos::random(size, &mut rng);
        let goal = loop {
            let g = Pos::random(size, &mut rng);
            if g != agent {
                break g;
            }
        };
        let vases = (0..size * size)
            .map(|i| {
                let p = Pos::from_index(i, size);
                // always draw so the layout stream does not depend on placement
                let draw = rng.random::<f64>() < params.density;
                p != agent && p != goal && draw
            })
            .collect();
        Self {
            size,
            agent,
            goal,
            vases,
        }
    }

    pub fn vase_count(&self) -> usize {
        self.vases.iter().filter(|&&v| v).count()
    }

    /// Move the agent; entering a vase cell removes the vase. Returns the task
    /// reward (Manhattan progress toward the goal minus the step penalty) and
    /// whether a vase broke.
    pub fn step(&mut self, m: Move, step_penalty: f64) -> (f64, bool) {
        let before = self.agent.manhattan(self.goal) as f64;
        if let Some(next) = self.agent.offset(m, self.size) {
            self.agent = next;
        }
        let idx = self.agent.index(self.size);
        let broke = std::mem::replace(&mut self.vases[idx], false);
        let after = self.agent.manhattan(self.goal) as f64;
        (before - after - step_penalty, broke)
    }

    pub fn encode(&self, out: &mut Vec<f64>) {
        let cells = self.size * self.size;
        let (agent, goal) = (self.agent.index(self.size), self.goal.index(self.size));
        push_plane(out, cells, |i| i == agent);
        push_plane(out, cells, |i| self.vases[i]);
        push_plane(out, cells, |i| i == goal);
    }
}

pub struct VaseWorld {
    params: VaseParams,
    state: VaseState,
}

impl VaseWorld {
    pub fn new(params: VaseParams) -> Self {
        let state = VaseState::reset(&params, 0);
        Self { params, state }
    }

    pub fn state(&self) -> &VaseState {
        &self.state
    }
}

impl Environment for VaseWorld {
    fn kind(&self) -> &'static str {
        "vases"
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn obs_dim(&self) -> usize {
        3 * self.params.size * self.params.size
    }

    fn reset(&mut self, seed: u64) {
        self.state = VaseState::reset(&self.params, seed);
    }

    fn step(&mut self, action: Action) -> StepInfo {
        let (reward, broke) = self
            .state
            .step(Move::from_index(action.as_discrete()), self.params.step_penalty);
        StepInfo {
            reward,
            event: if broke { Event::VaseBroken } else { Event::None },
        }
    }

    fn encode(&self, out: &mut Vec<f64>) {
        self.state.encode(out);
    }
}
