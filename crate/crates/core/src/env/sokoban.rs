//! Push-only box puzzle with solvable-by-construction levels.
//!
//! Observation channels: agent, box, goal, wall, empty.
//!
//! Levels are generated by reverse play: boxes start on their goals and the
//! agent performs a random walk in which it may *pull* an adjacent box along.
//! Every pull is the inverse of a push, so replaying the walk backwards with
//! inverted directions is a certified solution.

use rand::seq::SliceRandom;
use rand::Rng;

use super::grid::{push_plane, Move, Pos};
use super::{Action, ActionSpace, Environment, Event, SokobanParams, StepInfo};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Moved,
    Blocked,
    Pushed { against_wall: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SokobanState {
    pub size: usize,
    pub agent: Pos,
    pub walls: Vec<bool>,
    pub boxes: Vec<bool>,
    pub goals: Vec<bool>,
    solution: Vec<Move>,
}

const MAX_ATTEMPTS: usize = 64;

impl SokobanState {
    pub fn reset(params: &SokobanParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        for _ in 0..MAX_ATTEMPTS {
            if let Some(s) = Self::generate(params, &mut rng) {
                return s;
            }
        }
        panic!(
            "could not generate a {0}x{0} level with {1} boxes; lower `sokoban.boxes` or `sokoban.interior_walls`",
            params.size, params.boxes
        );
    }

    fn generate<R: Rng + ?Sized>(params: &SokobanParams, rng: &mut R) -> Option<Self> {
        let size = params.size;
        assert!(size >= 4, "sokoban maps need size >= 4");
        let cells = size * size;
        let mut walls: Vec<bool> = (0..cells)
            .map(|i| {
                let p = Pos::from_index(i, size);
                p.row == 0 || p.col == 0 || p.row == size - 1 || p.col == size - 1
            })
            .collect();

        let mut interior: Vec<usize> = (0..cells).filter(|&i| !walls[i]).collect();
        interior.shuffle(rng);
        let mut placed = 0;
        for &i in &interior {
            if placed == params.interior_walls {
                break;
            }
            walls[i] = true;
            if floor_connected(&walls, size) {
                placed += 1;
            } else {
                walls[i] = false;
            }
        }

        let mut floor: Vec<usize> = (0..cells).filter(|&i| !walls[i]).collect();
        if floor.len() < params.boxes + 1 {
            return None;
        }
        floor.shuffle(rng);
        let mut goals = vec![false; cells];
        let mut boxes = vec![false; cells];
        for &i in &floor[..params.boxes] {
            goals[i] = true;
            boxes[i] = true;
        }
        let mut state = Self {
            size,
            agent: Pos::from_index(floor[params.boxes], size),
            walls,
            boxes,
            goals,
            solution: Vec::new(),
        };

        let mut reverse = Vec::with_capacity(params.reverse_steps);
        for _ in 0..params.reverse_steps {
            let m = Move::from_index(rng.random_range(0..4));
            let pull = rng.random::<f64>() < params.pull_prob;
            if state.reverse_move(m, pull) {
                reverse.push(m);
            }
        }
        if state.solved() {
            return None;
        }
        state.solution = reverse.iter().rev().map(|m| m.opposite()).collect();
        Some(state)
    }

    /// One reverse-play step: walk in direction `m`, dragging the box behind
    /// the agent along when `pull` is set.
    fn reverse_move(&mut self, m: Move, pull: bool) -> bool {
        let Some(target) = self.agent.offset(m, self.size) else {
            return false;
        };
        let t = target.index(self.size);
        if self.walls[t] || self.boxes[t] {
            return false;
        }
        if pull {
            if let Some(behind) = self.agent.offset(m.opposite(), self.size) {
                let b = behind.index(self.size);
                if self.boxes[b] {
                    self.boxes[b] = false;
                    self.boxes[self.agent.index(self.size)] = true;
                }
            }
        }
        self.agent = target;
        true
    }

    fn blocked(&self, p: Pos) -> bool {
        let i = p.index(self.size);
        self.walls[i] || self.boxes[i]
    }

    fn is_wall(&self, p: Option<Pos>) -> bool {
        p.is_none_or(|p| self.walls[p.index(self.size)])
    }

    /// Push-only move.
    pub fn step(&mut self, m: Move) -> StepOutcome {
        let Some(target) = self.agent.offset(m, self.size) else {
            return StepOutcome::Blocked;
        };
        let t = target.index(self.size);
        if self.walls[t] {
            return StepOutcome::Blocked;
        }
        if !self.boxes[t] {
            self.agent = target;
            return StepOutcome::Moved;
        }
        let Some(beyond) = target.offset(m, self.size) else {
            return StepOutcome::Blocked;
        };
        if self.blocked(beyond) {
            return StepOutcome::Blocked;
        }
        self.boxes[t] = false;
        self.boxes[beyond.index(self.size)] = true;
        self.agent = target;
        StepOutcome::Pushed {
            against_wall: self.is_wall(beyond.offset(m, self.size)),
        }
    }

    pub fn solved(&self) -> bool {
        self.boxes.iter().zip(&self.goals).all(|(b, g)| b == g)
    }

    pub fn box_count(&self) -> usize {
        self.boxes.iter().filter(|&&b| b).count()
    }

    /// Moves that solve the freshly generated level.
    pub fn solution(&self) -> &[Move] {
        &self.solution
    }

    pub fn encode(&self, out: &mut Vec<f64>) {
        let cells = self.size * self.size;
        let agent = self.agent.index(self.size);
        push_plane(out, cells, |i| i == agent);
        push_plane(out, cells, |i| self.boxes[i]);
        push_plane(out, cells, |i| self.goals[i]);
        push_plane(out, cells, |i| self.walls[i]);
        push_plane(out, cells, |i| !self.walls[i] && !self.boxes[i] && i != agent);
    }
}

fn floor_connected(walls: &[bool], size: usize) -> bool {
    let Some(start) = walls.iter().position(|w| !w) else {
        return false;
    };
    let mut seen = vec![false; walls.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        let p = Pos::from_index(i, size);
        for m in Move::ALL {
            if let Some(q) = p.offset(m, size) {
                let j = q.index(size);
                if !walls[j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
    }
    count == walls.iter().filter(|w| !**w).count()
}

pub struct Sokoban {
    params: SokobanParams,
    state: SokobanState,
}

impl Sokoban {
    pub fn new(params: SokobanParams) -> Self {
        let state = SokobanState::reset(&params, 0);
        Self { params, state }
    }

    pub fn state(&self) -> &SokobanState {
        &self.state
    }
}

impl Environment for Sokoban {
    fn kind(&self) -> &'static str {
        "sokoban"
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn obs_dim(&self) -> usize {
        5 * self.params.size * self.params.size
    }

    fn reset(&mut self, seed: u64) {
        self.state = SokobanState::reset(&self.params, seed);
    }

    fn step(&mut self, action: Action) -> StepInfo {
        let event = match self.state.step(Move::from_index(action.as_discrete())) {
            StepOutcome::Pushed { against_wall } => Event::BoxPushed { against_wall },
            _ => Event::None,
        };
        StepInfo { reward: 0.0, event }
    }

    fn encode(&self, out: &mut Vec<f64>) {
        self.state.encode(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Open 5×5 room (3×3 floor) with one box.
    fn room(agent: Pos, boxed: Pos) -> SokobanState {
        let size = 5;
        let walls = (0..25)
            .map(|i| {
                let p = Pos::from_index(i, size);
                p.row == 0 || p.col == 0 || p.row == 4 || p.col == 4
            })
            .collect();
        let mut boxes = vec![false; 25];
        boxes[boxed.index(size)] = true;
        SokobanState {
            size,
            agent,
            walls,
            boxes,
            goals: vec![false; 25],
            solution: Vec::new(),
        }
    }

    #[test]
    fn push_into_wall_is_blocked() {
        let mut s = room(Pos::new(2, 2), Pos::new(2, 3));
        let before = s.clone();
        assert_eq!(s.step(Move::Right), StepOutcome::Blocked);
        assert_eq!(s, before);
    }

    #[test]
    fn push_with_free_cell_advances_both() {
        let mut s = room(Pos::new(2, 1), Pos::new(2, 2));
        assert_eq!(s.step(Move::Right), StepOutcome::Pushed { against_wall: true });
        assert_eq!(s.agent, Pos::new(2, 2));
        assert!(s.boxes[Pos::new(2, 3).index(5)]);
        let mut s = room(Pos::new(3, 1), Pos::new(2, 1));
        assert_eq!(s.step(Move::Up), StepOutcome::Pushed { against_wall: true });
        let mut s = room(Pos::new(3, 2), Pos::new(2, 2));
        s.walls[Pos::new(1, 1).index(5)] = false;
        s.walls[Pos::new(0, 2).index(5)] = false;
        assert_eq!(s.step(Move::Up), StepOutcome::Pushed { against_wall: false });
    }

    #[test]
    fn generated_levels_are_solved_by_their_plan() {
        for params in [
            SokobanParams::default(),
            SokobanParams {
                size: 8,
                boxes: 2,
                interior_walls: 3,
                ..SokobanParams::default()
            },
        ] {
            for seed in 0..200 {
                let mut s = SokobanState::reset(&params, seed);
                assert!(!s.solved());
                assert_eq!(s.box_count(), params.boxes);
                let plan = s.solution().to_vec();
                for m in plan {
                    assert_ne!(s.step(m), StepOutcome::Blocked);
                }
                assert!(s.solved(), "seed {seed}");
            }
        }
    }

    #[test]
    fn floor_stays_connected() {
        let params = SokobanParams {
            interior_walls: 20,
            ..SokobanParams::default()
        };
        for seed in 0..20 {
            let s = SokobanState::reset(&params, seed);
            assert!(floor_connected(&s.walls, s.size));
        }
    }
}
