//! The fixed-buffer training loop for the h-potential.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EnvRegistry};
use crate::error::{Error, Result};
use crate::model::{
    adam_step, init_mlp, loss_and_grad, AdamConfig, AdamState, Checkpoint, Gradients, MlpModel,
    PairRegularizer,
};
use crate::sampling::{fill_buffer_from_config, sample_minibatch, Buffer, Trajectory};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvConfig,
    /// Trajectories in the buffer (`M`), held-out ones included.
    pub trajectories: usize,
    /// Transitions per trajectory (`N`).
    pub length: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub regularizer: PairRegularizer,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip.
    pub clip: Option<f64>,
    pub eval_every: usize,
    pub holdout: f64,
    pub early_stopping: bool,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            trajectories: 4096,
            length: 128,
            iterations: 10_000,
            batch_size: 128,
            lambda: 0.0,
            regularizer: PairRegularizer::None,
            hidden: vec![256, 256],
            lr: 1e-4,
            weight_decay: 0.005,
            clip: None,
            eval_every: 100,
            holdout: 0.05,
            early_stopping: false,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Per-environment defaults at full scale.
    pub fn preset(kind: &str) -> Result<Self> {
        let env = EnvConfig::with_kind(kind);
        let base = Self {
            env,
            ..Self::default()
        };
        Ok(match kind {
            "vases" => base,
            "tomato" => Self {
                regularizer: PairRegularizer::Trajectory,
                lambda: 0.5,
                weight_decay: 0.0,
                ..base
            },
            "sokoban" => Self {
                length: 512,
                iterations: 20_000,
                batch_size: 256,
                hidden: vec![512, 512],
                regularizer: PairRegularizer::Trajectory,
                lambda: 0.05,
                weight_decay: 0.0,
                ..base
            },
            "mountain_car" | "pendulum" => Self {
                length: 256,
                iterations: 20_000,
                batch_size: 1024,
                regularizer: PairRegularizer::Trajectory,
                lambda: 1.0,
                weight_decay: 0.0,
                ..base
            },
            "ou" => Self {
                trajectories: 8192,
                length: 64,
                iterations: 20_000,
                batch_size: 1024,
                hidden: vec![512, 512],
                weight_decay: 0.0005,
                ..base
            },
            other => return Err(Error::UnknownEnv(other.to_string())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.trajectories == 0 || self.length == 0 {
            return bad("trajectories and length must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad(format!("holdout must lie in [0, 1), got {}", self.holdout));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be > 0 and weight_decay >= 0".into());
        }
        if self.clip.is_some_and(|c| !(c > 0.0)) {
            return bad("clip must be positive".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    /// Mean training loss since the previous record.
    pub loss: f64,
    pub heldout_mean_dh: f64,
    pub param_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["iteration", "loss", "heldout_mean_dh", "param_norm"])?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<train log>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Training and held-out buffers for a config.
pub struct TrainData {
    pub train: Buffer,
    pub heldout: Option<Buffer>,
}

impl TrainData {
    pub fn generate(config: &TrainConfig, registry: &EnvRegistry) -> Result<Self> {
        let buffer = fill_buffer_from_config(
            registry,
            &config.env,
            config.trajectories,
            config.length,
            seed::derive(config.seed, 1),
        )?;
        let (train, heldout) = buffer.split_holdout(config.holdout)?;
        Ok(Self { train, heldout })
    }
}

pub struct TrainOutcome {
    pub model: MlpModel,
    pub optimizer: AdamState,
    pub log: TrainLog,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.optimizer.clone()),
        }
    }
}

/// Mean `Δh` over every transition of every trajectory.
///
/// The per-trajectory sum telescopes, so only the end points are evaluated.
pub fn mean_dh(model: &MlpModel, buffer: &Buffer) -> Result<f64> {
    if buffer.is_empty() || buffer.length == 0 {
        return Err(Error::EmptyBuffer);
    }
    let mut ends = Vec::with_capacity(2 * buffer.len() * buffer.dim);
    for tr in &buffer.trajectories {
        ends.extend_from_slice(tr.state(0));
        ends.extend_from_slice(tr.state(buffer.length));
    }
    let h = model.forward(&ends)?;
    let total: f64 = h.chunks_exact(2).map(|p| p[1] - p[0]).sum();
    Ok(total / (buffer.len() * buffer.length) as f64)
}

fn clip_gradients(g: &mut Gradients, max_norm: f64) {
    let norm = g.norm();
    if norm > max_norm {
        let s = max_norm / norm;
        for t in g.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Generate the buffer and train from scratch.
pub fn train(config: &TrainConfig) -> Result<(TrainOutcome, TrainData)> {
    config.validate()?;
    let data = TrainData::generate(config, &EnvRegistry::builtin())?;
    let outcome = train_on(config, &data, None)?;
    Ok((outcome, data))
}

/// Run the loop on prepared data, optionally continuing from a checkpoint.
///
/// `config.iterations` is the total count; a resumed run picks up at the
/// optimizer's step. The minibatch of iteration `i` depends only on the seed
/// and `i`, so a resumed run continues exactly as an uninterrupted one would.
/// Early-stopping counters are not checkpointed and restart on resume.
pub fn train_on(config: &TrainConfig, data: &TrainData, resume: Option<Checkpoint>) -> Result<TrainOutcome> {
    config.validate()?;
    let (mut model, mut opt) = match resume {
        Some(Checkpoint { model, optimizer }) => {
            let opt = optimizer.unwrap_or_else(|| AdamState::new(config.adam(), &model));
            if !opt.matches(&model) {
                return Err(Error::Checkpoint("optimizer state does not match the model".into()));
            }
            (model, opt)
        }
        None => {
            let model = init_mlp(data.train.dim, &config.hidden, seed::derive(config.seed, 2));
            let opt = AdamState::new(config.adam(), &model);
            (model, opt)
        }
    };
    if model.input_dim() != data.train.dim {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: data.train.dim,
        });
    }
    let batch_seed = seed::derive(config.seed, 3);
    let mut log = TrainLog::default();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let start = opt.step as usize;
    for i in start..config.iterations {
        let mut rng = seed::stream(batch_seed, i as u64);
        let batch = sample_minibatch(&data.train, config.batch_size, &mut rng)?;
        let (loss, mut grads) = loss_and_grad(&model, &batch, config.lambda, config.regularizer)?;
        if let Some(c) = config.clip {
            clip_gradients(&mut grads, c);
        }
        adam_step(&mut model, &mut opt, &grads);
        loss_sum += loss;
        loss_count += 1;

        let done = i + 1;
        if done % config.eval_every == 0 || done == config.iterations {
            let heldout_mean_dh = match &data.heldout {
                Some(h) => mean_dh(&model, h)?,
                None => f64::NAN,
            };
            log.records.push(LogRecord {
                iteration: done,
                loss: loss_sum / loss_count as f64,
                heldout_mean_dh,
                param_norm: model.norm(),
            });
            loss_sum = 0.0;
            loss_count = 0;
            if config.early_stopping && heldout_mean_dh.is_finite() {
                if heldout_mean_dh > best {
                    best = heldout_mean_dh;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= config.patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }
    Ok(TrainOutcome {
        model,
        optimizer: opt,
        log,
    })
}

/// `h` at every state of a trajectory and `Δh` of every transition
/// (`dh[t] = h[t+1] − h[t]`, aligned with `events[t]`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEval {
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
}

pub fn evaluate_along_trajectory(model: &MlpModel, traj: &Trajectory) -> Result<TrajectoryEval> {
    if traj.dim() != model.input_dim() {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: traj.dim(),
        });
    }
    let h = model.forward(traj.flat_states())?;
    let dh = h.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(TrajectoryEval { h, dh })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: &str) -> TrainConfig {
        TrainConfig {
            trajectories: 16,
            length: 8,
            iterations: 30,
            batch_size: 8,
            hidden: vec![8],
            eval_every: 10,
            env: EnvConfig::with_kind(kind),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_init() {
        let cfg = TrainConfig {
            iterations: 0,
            ..tiny("vases")
        };
        let (out, data) = train(&cfg).unwrap();
        assert_eq!(out.model, init_mlp(data.train.dim, &[8], seed::derive(0, 2)));
        assert!(out.log.records.is_empty());
        assert_eq!(out.optimizer.step, 0);
    }

    #[test]
    fn reproducible_and_resumable() {
        let cfg = tiny("mountain_car");
        let (a, data) = train(&cfg).unwrap();
        let (b, _) = train(&cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);

        let half = TrainConfig {
            iterations: 10,
            ..cfg.clone()
        };
        let first = train_on(&half, &data, None).unwrap();
        let rest = train_on(&cfg, &data, Some(first.checkpoint())).unwrap();
        assert_eq!(rest.model, a.model);
        assert_eq!(rest.optimizer, a.optimizer);
        assert_eq!(rest.log.records, a.log.records[1..]);
    }

    #[test]
    fn log_is_monotone_and_split_held_out() {
        let (out, data) = train(&tiny("ou")).unwrap();
        let its: Vec<usize> = out.log.records.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![10, 20, 30]);
        assert_eq!(data.heldout.as_ref().unwrap().len(), 1);
        assert_eq!(data.train.len(), 15);
        let mut buf = Vec::new();
        out.log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,loss,heldout_mean_dh,param_norm\n"));
    }

    #[test]
    fn mean_dh_matches_pairwise() {
        let (out, data) = train(&tiny("pendulum")).unwrap();
        let fast = mean_dh(&out.model, &data.train).unwrap();
        let mut slow = 0.0;
        for tr in &data.train.trajectories {
            let e = evaluate_along_trajectory(&out.model, tr).unwrap();
            slow += e.dh.iter().sum::<f64>();
        }
        slow /= (data.train.len() * data.train.length) as f64;
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn early_stopping_halts() {
        let cfg = TrainConfig {
            iterations: 5000,
            eval_every: 1,
            early_stopping: true,
            patience: 3,
            lr: 1e-9,
            ..tiny("ou")
        };
        let (out, _) = train(&cfg).unwrap();
        assert!(out.log.stopped_early || out.log.records.len() == 5000);
    }

    #[test]
    fn constant_model_has_flat_trajectory() {
        let (_, data) = train(&TrainConfig {
            iterations: 0,
            ..tiny("tomato")
        })
        .unwrap();
        let mut m = init_mlp(data.train.dim, &[4], 0).zeros_like();
        m.layers.last_mut().unwrap().bias[0] = 3.0;
        let e = evaluate_along_trajectory(&m, &data.train.trajectories[0]).unwrap();
        assert_eq!(e.h.len(), 9);
        assert!(e.dh.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let m = init_mlp(3, &[4], 0);
        let mut g = m.clone();
        clip_gradients(&mut g, 0.5);
        assert!((g.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn presets_validate() {
        for k in ["vases", "tomato", "sokoban", "mountain_car", "pendulum", "ou"] {
            TrainConfig::preset(k).unwrap().validate().unwrap();
        }
        assert!(TrainConfig::preset("chess").is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
