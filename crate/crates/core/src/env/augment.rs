//! Extra observation channels used to probe robustness: temporally
//! uncorrelated noise ("noisy TV") and a clock that advances every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Action, ActionSpace, Environment, StepInfo};
use crate::seed::{self, Rng as SeedRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    TvNoise,
    CausalClock,
}

impl std::str::FromStr for AugmentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tv_noise" | "tv" => Ok(Self::TvNoise),
            "causal_clock" | "clock" => Ok(Self::CausalClock),
            other => Err(format!("unknown augmentation `{other}`")),
        }
    }
}

/// Append one `cells`-sized channel to `state`: iid `U[0, 1)` values for
/// [`AugmentKind::TvNoise`], the constant `t / episode_len` for
/// [`AugmentKind::CausalClock`].
pub fn augment_state<R: Rng + ?Sized>(
    state: &[f64],
    kind: AugmentKind,
    t: usize,
    episode_len: usize,
    cells: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(state.len() + cells);
    out.extend_from_slice(state);
    push_channel(&mut out, kind, t, episode_len, cells, rng);
    out
}

fn push_channel<R: Rng + ?Sized>(
    out: &mut Vec<f64>,
    kind: AugmentKind,
    t: usize,
    episode_len: usize,
    cells: usize,
    rng: &mut R,
) {
    match kind {
        AugmentKind::TvNoise => out.extend((0..cells).map(|_| rng.random::<f64>())),
        AugmentKind::CausalClock => {
            let v = t as f64 / episode_len.max(1) as f64;
            out.extend(std::iter::repeat_n(v, cells));
        }
    }
}

/// Wraps a gridworld and appends the extra channel to its observation. The
/// noise frame is drawn once per reset/step so that observing is pure.
pub struct Augmented {
    inner: Box<dyn Environment>,
    kind: AugmentKind,
    episode_len: usize,
    cells: usize,
    t: usize,
    rng: SeedRng,
    channel: Vec<f64>,
}

impl Augmented {
    pub fn new(
        inner: Box<dyn Environment>,
        kind: AugmentKind,
        episode_len: usize,
        cells: usize,
    ) -> Self {
        let mut s = Self {
            inner,
            kind,
            episode_len,
            cells,
            t: 0,
            rng: seed::rng(0),
            channel: Vec::new(),
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.channel.clear();
        push_channel(
            &mut self.channel,
            self.kind,
            self.t,
            self.episode_len,
            self.cells,
            &mut self.rng,
        );
    }
}

impl Environment for Augmented {
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn action_space(&self) -> ActionSpace {
        self.inner.action_space()
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim() + self.cells
    }

    fn reset(&mut self, seed: u64) {
        self.inner.reset(seed);
        self.rng = seed::stream(seed, 0xa06);
        self.t = 0;
        self.refresh();
    }

    fn step(&mut self, action: Action) -> StepInfo {
        let info = self.inner.step(action);
        self.t += 1;
        self.refresh();
        info
    }

    fn encode(&self, out: &mut Vec<f64>) {
        self.inner.encode(out);
        out.extend_from_slice(&self.channel);
    }
}
