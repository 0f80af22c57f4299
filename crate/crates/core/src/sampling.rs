//! Random-policy rollouts and the fixed trajectory buffer they fill.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvConfig, EnvRegistry, Environment, Event};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub env: String,
    pub seed: u64,
    pub episode: usize,
}

/// `N + 1` encoded states with the `N` actions, rewards and simulator events
/// between them. States are stored contiguously, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    dim: usize,
    states: Vec<f64>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta, dim: usize) -> Self {
        Self {
            meta,
            dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of transitions `N`.
    pub fn len(&self) -> usize {
        self.num_states().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_states(&self) -> usize {
        self.states.len() / self.dim.max(1)
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.dim..(t + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// All states as one row-major block.
    pub fn flat_states(&self) -> &[f64] {
        &self.states
    }

    pub fn push_state(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: state.len(),
            });
        }
        self.states.extend_from_slice(state);
        Ok(())
    }
}

/// Roll out the uniform random policy for `length` transitions.
///
/// The environment is reset with a seed derived from `seed`; actions come
/// from an independent stream of the same seed.
pub fn rollout(env: &mut dyn Environment, length: usize, seed: u64, episode: usize) -> Trajectory {
    env.reset(seed::derive(seed, 0));
    let mut policy = seed::stream(seed, 1);
    let space = env.action_space();
    let dim = env.obs_dim();
    let mut traj = Trajectory::new(
        TrajectoryMeta {
            env: env.kind().to_string(),
            seed,
            episode,
        },
        dim,
    );
    traj.states.reserve(dim * (length + 1));
    env.encode(&mut traj.states);
    for _ in 0..length {
        let action = space.sample(&mut policy);
        let info = env.step(action);
        traj.actions.push(action);
        traj.rewards.push(info.reward);
        traj.events.push(info.event);
        env.encode(&mut traj.states);
    }
    traj
}

/// `M` trajectories of length `N`, all of one environment kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    pub env: String,
    pub length: usize,
    pub dim: usize,
    pub trajectories: Vec<Trajectory>,
}

impl Buffer {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories.first().ok_or(Error::EmptyBuffer)?;
        let (env, length, dim) = (first.meta.env.clone(), first.len(), first.dim());
        for t in &trajectories {
            if t.len() != length || t.dim() != dim || t.meta.env != env {
                return Err(Error::Config(format!(
                    "trajectory {} does not match the buffer ({} vs {env}, length {} vs {length}, dim {} vs {dim})",
                    t.meta.episode,
                    t.meta.env,
                    t.len(),
                    t.dim()
                )));
            }
        }
        Ok(Self {
            env,
            length,
            dim,
            trajectories,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Move the last `ceil(fraction · M)` trajectories into a held-out buffer
    /// (at least one, and never all of them when `M ≥ 2`).
    pub fn split_holdout(mut self, fraction: f64) -> Result<(Buffer, Option<Buffer>)> {
        let m = self.len();
        if m < 2 || fraction <= 0.0 {
            return Ok((self, None));
        }
        let k = ((fraction * m as f64).ceil() as usize).clamp(1, m - 1);
        let held = self.trajectories.split_off(m - k);
        Ok((Buffer::new(self.trajectories)?, Some(Buffer::new(held)?)))
    }

    /// Every consecutive pair of every trajectory, as `(k, t)` indices.
    pub fn all_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |k| (0..self.length).map(move |t| (k, t)))
    }

    pub fn gather(&self, index: &[(usize, usize)]) -> Minibatch {
        let mut current = Vec::with_capacity(index.len() * self.dim);
        let mut next = Vec::with_capacity(index.len() * self.dim);
        for &(k, t) in index {
            let traj = &self.trajectories[k];
            current.extend_from_slice(traj.state(t));
            next.extend_from_slice(traj.state(t + 1));
        }
        Minibatch {
            dim: self.dim,
            index: index.to_vec(),
            current,
            next,
        }
    }
}

/// Fill a buffer with `m` independent rollouts of length `n`.
///
/// Trajectory `k` uses the seed `derive(seed, k)` and lands at position `k`,
/// so the result does not depend on how rollouts are scheduled.
pub fn fill_buffer<F>(factory: F, m: usize, n: usize, seed: u64) -> Result<Buffer>
where
    F: Fn() -> Result<Box<dyn Environment>> + Sync,
{
    if m == 0 {
        return Err(Error::Config("buffer needs at least one trajectory".into()));
    }
    let trajectories = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut env = factory()?;
            Ok(rollout(env.as_mut(), n, seed::derive(seed, k as u64), k))
        })
        .collect::<Result<Vec<_>>>()?;
    Buffer::new(trajectories)
}

/// [`fill_buffer`] for an environment built from the registry.
pub fn fill_buffer_from_config(
    registry: &EnvRegistry,
    config: &EnvConfig,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<Buffer> {
    registry.create(config)?;
    fill_buffer(|| registry.create(config), m, n, seed)
}

/// Consecutive-state pairs `(s_t, s_{t+1})`, stacked row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub dim: usize,
    pub index: Vec<(usize, usize)>,
    pub current: Vec<f64>,
    pub next: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn pair(&self, i: usize) -> (&[f64], &[f64]) {
        let r = i * self.dim..(i + 1) * self.dim;
        (&self.current[r.clone()], &self.next[r])
    }

    /// Build a batch directly from explicit pairs.
    pub fn from_pairs(dim: usize, pairs: &[(&[f64], &[f64])]) -> Result<Self> {
        let mut current = Vec::with_capacity(pairs.len() * dim);
        let mut next = Vec::with_capacity(pairs.len() * dim);
        for (a, b) in pairs {
            for s in [a, b] {
                if s.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: s.len(),
                    });
                }
            }
            current.extend_from_slice(a);
            next.extend_from_slice(b);
        }
        Ok(Self {
            dim,
            index: (0..pairs.len()).map(|i| (i, 0)).collect(),
            current,
            next,
        })
    }
}

/// `batch_size` iid pairs: trajectory uniform over the buffer, time step
/// uniform over `0..N`.
pub fn sample_minibatch<R: Rng + ?Sized>(
    buffer: &Buffer,
    batch_size: usize,
    rng: &mut R,
) -> Result<Minibatch> {
    if buffer.is_empty() || buffer.length == 0 {
        return Err(Error::EmptyBuffer);
    }
    let index: Vec<_> = (0..batch_size)
        .map(|_| {
            (
                rng.random_range(0..buffer.len()),
                rng.random_range(0..buffer.length),
            )
        })
        .collect();
    Ok(buffer.gather(&index))
}

// ---------------------------------------------------------------------------
// CSV dump

/// Sidecar written next to every trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferManifest {
    pub env: String,
    pub trajectories: usize,
    pub length: usize,
    pub dim: usize,
    pub seed: u64,
    pub config: EnvConfig,
}

pub fn manifest_path(dump: &Path) -> PathBuf {
    let mut p = dump.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn format_action(a: &Action) -> String {
    match a {
        Action::Discrete(i) => i.to_string(),
        // Debug keeps a decimal point, which is how the reader tells them apart
        Action::Continuous(x) => format!("{x:?}"),
    }
}

fn parse_action(s: &str) -> std::result::Result<Action, String> {
    if s.contains(['.', 'e', 'E', 'i', 'N']) {
        s.parse().map(Action::Continuous).map_err(|_| format!("bad action `{s}`"))
    } else {
        s.parse().map(Action::Discrete).map_err(|_| format!("bad action `{s}`"))
    }
}

pub fn format_event(e: &Event) -> String {
    match e {
        Event::None => String::new(),
        Event::VaseBroken => "vase".into(),
        Event::Watered { gain } => format!("water:{gain:?}"),
        Event::BoxPushed { against_wall: false } => "push".into(),
        Event::BoxPushed { against_wall: true } => "push_wall".into(),
    }
}

pub fn parse_event(s: &str) -> std::result::Result<Event, String> {
    Ok(match s {
        "" => Event::None,
        "vase" => Event::VaseBroken,
        "push" => Event::BoxPushed {
            against_wall: false,
        },
        "push_wall" => Event::BoxPushed { against_wall: true },
        other => match other.strip_prefix("water:") {
            Some(g) => Event::Watered {
                gain: g.parse().map_err(|_| format!("bad event `{other}`"))?,
            },
            None => return Err(format!("bad event `{other}`")),
        },
    })
}

/// Write one row per state: `episode, t, action, reward, event, s0 … s{d-1}`.
/// `action`, `reward` and `event` describe the transition leaving `s_t` and are empty
/// on the final row.
pub fn write_dump(buffer: &Buffer, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![
        "episode".to_string(),
        "t".into(),
        "action".into(),
        "reward".into(),
        "event".into(),
    ];
    header.extend((0..buffer.dim).map(|i| format!("s{i}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for traj in &buffer.trajectories {
        for (t, state) in traj.states().enumerate() {
            row.clear();
            row.push(traj.meta.episode.to_string());
            row.push(t.to_string());
            row.push(traj.actions.get(t).map(format_action).unwrap_or_default());
            row.push(traj.rewards.get(t).map(|r| format!("{r:?}")).unwrap_or_default());
            row.push(traj.events.get(t).map(format_event).unwrap_or_default());
            row.extend(state.iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

const FIXED_COLUMNS: usize = 5;

pub fn write_manifest(manifest: &BufferManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<BufferManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Read a dump written by [`write_dump`]. `env` and `seed` are taken from the
/// manifest when one sits next to the dump.
pub fn read_dump(path: &Path) -> Result<Buffer> {
    let manifest = read_manifest(&manifest_path(path)).ok();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let dim = r.headers()?.len().saturating_sub(FIXED_COLUMNS);
    let env = manifest.as_ref().map_or_else(|| "unknown".to_string(), |m| m.env.clone());
    let base_seed = manifest.as_ref().map_or(0, |m| m.seed);

    let bad = |line: u64, msg: String| Error::Parse {
        line: line as usize,
        msg,
    };
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut state = Vec::with_capacity(dim);
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let episode: usize = rec[0].parse().map_err(|_| bad(line, "bad episode".into()))?;
        let t: usize = rec[1].parse().map_err(|_| bad(line, "bad t".into()))?;
        state.clear();
        for v in rec.iter().skip(FIXED_COLUMNS) {
            state.push(v.parse().map_err(|_| bad(line, format!("bad value `{v}`")))?);
        }
        if t == 0 {
            trajectories.push(Trajectory::new(
                TrajectoryMeta {
                    env: env.clone(),
                    seed: seed::derive(base_seed, episode as u64),
                    episode,
                },
                dim,
            ));
        }
        let traj = trajectories
            .last_mut()
            .filter(|tr| tr.meta.episode == episode && tr.num_states() == t)
            .ok_or_else(|| bad(line, format!("row out of order (episode {episode}, t {t})")))?;
        traj.push_state(&state)?;
        if !rec[2].is_empty() {
            traj.actions.push(parse_action(&rec[2]).map_err(|m| bad(line, m))?);
            let reward = rec[3].parse().map_err(|_| bad(line, format!("bad reward `{}`", &rec[3])))?;
            traj.rewards.push(reward);
            traj.events.push(parse_event(&rec[4]).map_err(|m| bad(line, m))?);
        }
    }
    Buffer::new(trajectories)
}
