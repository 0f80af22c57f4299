use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use arrowtime::chain::{self, templates, ChainRegularizer};
use arrowtime::config;
use arrowtime::env::{EnvConfig, EnvRegistry, OuParams};
use arrowtime::jko::{self, DensityEnsemble};
use arrowtime::model::{
    init_mlp, loss_and_grad, read_checkpoint, write_checkpoint, PairRegularizer,
};
use arrowtime::rewards::{self, RewardShapingConfig, Transfer};
use arrowtime::sampling::{
    self, fill_buffer_from_config, format_event, read_dump, BufferManifest, Buffer, Minibatch,
};
use arrowtime::seed;
use arrowtime::trainer::{self, evaluate_along_trajectory, TrainConfig, TrainData};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::Run;
use crate::{read_text, CliError, ConfigArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| arrowtime::Error::io(dir, e).into())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let f = File::create(path).map_err(|e| arrowtime::Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(e: csv::Error) -> CliError {
    arrowtime::Error::from(e).into()
}

fn flush<W: std::io::Write>(mut w: csv::Writer<W>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| arrowtime::Error::io(path, e).into())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

/// Defaults, then ARROWTIME_SEED, then the config file, then `--set`, then
/// `--seed`.
fn resolve<T>(
    mut base: T,
    args: &ConfigArgs,
    seed: Option<u64>,
    seed_from_flag: bool,
    set_seed: impl Fn(&mut T, u64),
) -> Result<(T, serde_json::Value), CliError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    if let (Some(s), false) = (seed, seed_from_flag) {
        set_seed(&mut base, s);
    }
    let text = args.config.as_deref().map(read_text).transpose()?;
    let mut overrides = args.overrides.clone();
    if let (Some(s), true) = (seed, seed_from_flag) {
        overrides.push(format!("seed={s}"));
    }
    Ok(config::resolve(&base, text.as_deref(), &overrides)?)
}

fn fmt_vec(v: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

// ---------------------------------------------------------------------------

pub fn analytic(path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let mut run = Run::start("analytic");
    let file = chain::read_chain_file(path)?;
    let (c, p) = (&file.chain, file.params);
    run.config(
        json!({
            "chain": path,
            "n": c.n(),
            "horizon": c.horizon(),
            "lambda": p.lambda,
            "omega": p.omega,
        }),
        None,
    );
    let h_l2 = chain::solve_l2(c, p);
    let h_tr = chain::solve_traj_reg(c, p);
    let obj_l2 = chain::objective_value(c, &h_l2, p, ChainRegularizer::L2)?;
    let obj_tr = chain::objective_value(c, &h_tr, p, ChainRegularizer::Trajectory)?;
    println!("chain: n = {}, horizon = {}, lambda = {}, omega = {}", c.n(), c.horizon(), p.lambda, p.omega);
    println!("L2 regularizer:         h = {}  objective = {obj_l2:.6}", fmt_vec(h_l2.iter().copied()));
    println!("trajectory regularizer: h = {}  objective = {obj_tr:.6}", fmt_vec(h_tr.iter().copied()));

    let checks = templates::verify(c, p);
    for ch in &checks {
        println!(
            "check {}: expected {} got {} (max error {:.2e}) {}",
            ch.name,
            fmt_vec(ch.expected.iter().copied()),
            fmt_vec(ch.got.iter().copied()),
            ch.max_abs_err,
            if ch.passed { "ok" } else { "FAILED" }
        );
    }

    create_dir(out_dir)?;
    let csv_path = out_dir.join("analytic.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["state", "h_l2", "h_trajectory"]).map_err(csv_err)?;
    for i in 0..c.n() {
        w.write_record([(i + 1).to_string(), format!("{:?}", h_l2[i]), format!("{:?}", h_tr[i])])
            .map_err(csv_err)?;
    }
    flush(w, &csv_path)?;
    run.artifact(&csv_path);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    run.summary(json!({
        "objective_l2": obj_l2,
        "objective_trajectory": obj_tr,
        "checks": checks.iter().map(|c| json!({"name": c.name, "max_abs_err": c.max_abs_err, "passed": c.passed})).collect::<Vec<_>>(),
    }));
    run.finish(&out_dir.join("analytic.run.json"))?;
    if !failed.is_empty() {
        return Err(CliError::Check(format!("closed-form checks failed: {}", failed.join(", "))));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RolloutConfig {
    env: EnvConfig,
    trajectories: usize,
    length: usize,
    seed: u64,
}

pub fn rollout(
    kind: &str,
    trajectories: usize,
    length: usize,
    out: &Path,
    args: &ConfigArgs,
    seed: Option<u64>,
    seed_from_flag: bool,
) -> Result<(), CliError> {
    let mut run = Run::start("rollout");
    let base = RolloutConfig {
        env: EnvConfig::with_kind(kind),
        trajectories,
        length,
        seed: 0,
    };
    let (cfg, resolved) = resolve(base, args, seed, seed_from_flag, |c, s| c.seed = s)?;
    run.config(resolved, Some(cfg.seed));
    let registry = EnvRegistry::builtin();
    let buffer = fill_buffer_from_config(&registry, &cfg.env, cfg.trajectories, cfg.length, cfg.seed)?;
    sampling::write_dump(&buffer, out)?;
    let manifest_path = sampling::manifest_path(out);
    sampling::write_manifest(
        &BufferManifest {
            env: buffer.env.clone(),
            trajectories: buffer.len(),
            length: buffer.length,
            dim: buffer.dim,
            seed: cfg.seed,
            config: cfg.env.clone(),
        },
        &manifest_path,
    )?;
    run.artifact(out);
    run.artifact(&manifest_path);
    println!(
        "wrote {} trajectories of length {} ({} env, state dim {}) to {}",
        buffer.len(),
        buffer.length,
        buffer.env,
        buffer.dim,
        out.display()
    );
    run.finish(&with_suffix(out, ".run.json"))
}

// ---------------------------------------------------------------------------

fn resolve_train(
    kind: &str,
    args: &ConfigArgs,
    seed: Option<u64>,
    seed_from_flag: bool,
) -> Result<(TrainConfig, serde_json::Value), CliError> {
    let base = TrainConfig::preset(kind)?;
    let (cfg, resolved) = resolve(base, args, seed, seed_from_flag, |c, s| c.seed = s)?;
    cfg.validate()?;
    Ok((cfg, resolved))
}

pub fn train(
    kind: &str,
    out_dir: &Path,
    resume: Option<&Path>,
    args: &ConfigArgs,
    seed: Option<u64>,
    seed_from_flag: bool,
) -> Result<(), CliError> {
    let mut run = Run::start("train");
    let (cfg, resolved) = resolve_train(kind, args, seed, seed_from_flag)?;
    run.config(resolved, Some(cfg.seed));
    let start = resume.map(read_checkpoint).transpose()?;
    let data = TrainData::generate(&cfg, &EnvRegistry::builtin())?;
    let outcome = trainer::train_on(&cfg, &data, start)?;

    create_dir(out_dir)?;
    let ckpt = out_dir.join("model.ckpt");
    write_checkpoint(&outcome.checkpoint(), &ckpt)?;
    let log = out_dir.join("train_log.csv");
    outcome.log.save(&log)?;
    run.artifact(&ckpt);
    run.artifact(&log);
    let last = outcome.log.records.last();
    if let Some(r) = last {
        println!(
            "iteration {}: loss {:.6}, held-out mean dh {:.6}, parameter norm {:.3}",
            r.iteration, r.loss, r.heldout_mean_dh, r.param_norm
        );
    } else {
        println!("no training iterations run; wrote the initial model");
    }
    run.summary(json!({
        "iterations": outcome.optimizer.step,
        "stopped_early": outcome.log.stopped_early,
        "final": last,
        "parameters": outcome.model.num_params(),
    }));
    run.finish(&out_dir.join("train.run.json"))
}

// ---------------------------------------------------------------------------

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub dump: &'a Path,
    pub out: &'a Path,
    pub beta: f64,
    pub step_threshold: Option<f64>,
    pub momentum: f64,
    pub hist: Option<&'a Path>,
    pub bins: usize,
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut run = Run::start("eval");
    let shaping = RewardShapingConfig {
        beta: a.beta,
        transfer: match a.step_threshold {
            Some(threshold) => Transfer::Step { threshold },
            None => Transfer::Identity,
        },
        momentum: a.momentum,
    };
    shaping.validate()?;
    run.config(
        json!({
            "checkpoint": a.checkpoint,
            "dump": a.dump,
            "shaping": shaping,
            "bins": a.bins,
        }),
        None,
    );
    let model = read_checkpoint(a.checkpoint)?.model;
    let buffer = read_dump(a.dump)?;

    let mut w = csv_writer(a.out)?;
    w.write_record([
        "episode", "t", "r", "h", "h_next", "eta", "safety", "curiosity", "tomato", "event",
    ])
    .map_err(csv_err)?;
    let mut total_dh = 0.0;
    for tr in &buffer.trajectories {
        let e = evaluate_along_trajectory(&model, tr)?;
        let tomato = rewards::tomato_intrinsic(&e.dh, shaping.momentum);
        for t in 0..tr.len() {
            let r = tr.rewards[t];
            let eta = e.dh[t];
            total_dh += eta;
            w.write_record([
                tr.meta.episode.to_string(),
                t.to_string(),
                format!("{r:?}"),
                format!("{:?}", e.h[t]),
                format!("{:?}", e.h[t + 1]),
                format!("{eta:?}"),
                format!("{:?}", rewards::safety_reward(r, eta, &shaping)),
                format!("{:?}", rewards::curiosity_reward(eta)),
                format!("{:?}", tomato[t]),
                format_event(&tr.events[t]),
            ])
            .map_err(csv_err)?;
        }
    }
    flush(w, a.out)?;
    run.artifact(a.out);
    let mean_dh = total_dh / (buffer.len() * buffer.length).max(1) as f64;
    println!("mean dh over {} transitions: {mean_dh:.6}", buffer.len() * buffer.length);

    let mut summary = json!({ "mean_dh": mean_dh });
    if let Some(path) = a.hist {
        let means = write_histograms(&model, &buffer, a.bins, path)?;
        for (t, m) in &means {
            println!("mean h at t = {t}: {m:.6}");
        }
        summary["hist_means"] = json!(means);
        run.artifact(path);
    }
    run.summary(summary);
    run.finish(&with_suffix(a.out, ".run.json"))
}

/// Histograms of `h` at `t = 0, N/4, N` on shared bins; returns the means.
fn write_histograms(
    model: &arrowtime::model::MlpModel,
    buffer: &Buffer,
    bins: usize,
    path: &Path,
) -> Result<Vec<(usize, f64)>, CliError> {
    let bins = bins.max(1);
    let n = buffer.length;
    let steps = [0, n / 4, n];
    let mut values = Vec::new();
    for &t in &steps {
        let states: Vec<f64> = buffer
            .trajectories
            .iter()
            .flat_map(|tr| tr.state(t).iter().copied())
            .collect();
        values.push(model.forward(&states)?);
    }
    let lo = values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut w = csv_writer(path)?;
    w.write_record(["t", "bin_low", "bin_high", "count"]).map_err(csv_err)?;
    let mut means = Vec::new();
    for (&t, vals) in steps.iter().zip(&values) {
        let mut counts = vec![0usize; bins];
        for v in vals {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let low = lo + b as f64 * width;
            w.write_record([t.to_string(), format!("{low:?}"), format!("{:?}", low + width), c.to_string()])
                .map_err(csv_err)?;
        }
        means.push((t, vals.iter().sum::<f64>() / vals.len() as f64));
    }
    flush(w, path)?;
    Ok(means)
}

// ---------------------------------------------------------------------------

pub struct JkoArgs<'a> {
    pub out_dir: &'a Path,
    pub checkpoint: Option<&'a Path>,
    pub drift_only: bool,
    pub entropy_selftest: bool,
    pub resamples: usize,
    pub config: &'a ConfigArgs,
    pub seed: Option<u64>,
    pub seed_from_flag: bool,
}

fn entropy_selftest(seed_value: u64) -> Result<(f64, f64), CliError> {
    let mut rng = seed::rng(seed_value);
    let pts: Vec<f64> = (0..200_000).map(|_| rng.sample(StandardNormal)).collect();
    let h = jko::kl_entropy(&pts, 2, jko::DEFAULT_K)?;
    let exact = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    Ok((h, exact))
}

pub fn jko(a: JkoArgs) -> Result<(), CliError> {
    let mut run = Run::start("jko");
    if a.entropy_selftest {
        let (h, exact) = entropy_selftest(7)?;
        println!("entropy self-test: estimate {h:.4}, exact {exact:.4}");
        if (h - exact).abs() >= 0.02 {
            return Err(CliError::Check(format!(
                "entropy estimate {h:.4} is not within 0.02 of {exact:.4}"
            )));
        }
    }
    let (mut cfg, _) = resolve_train("ou", a.config, a.seed, a.seed_from_flag)?;
    if a.drift_only {
        cfg.env.ou.noise = 0.0;
    }
    if cfg.env.kind != "ou" {
        return Err(CliError::Config(format!("jko needs env.kind = ou, got {}", cfg.env.kind)));
    }
    let resolved = serde_json::to_value(&cfg).map_err(arrowtime::Error::from)?;
    run.config(resolved, Some(cfg.seed));
    create_dir(a.out_dir)?;

    let data = TrainData::generate(&cfg, &EnvRegistry::builtin())?;
    let model = match a.checkpoint {
        Some(p) => read_checkpoint(p)?.model,
        None => {
            let outcome = trainer::train_on(&cfg, &data, None)?;
            let ckpt = a.out_dir.join("model.ckpt");
            write_checkpoint(&outcome.checkpoint(), &ckpt)?;
            let log = a.out_dir.join("train_log.csv");
            outcome.log.save(&log)?;
            run.artifact(&ckpt);
            run.artifact(&log);
            outcome.model
        }
    };
    let mut all = data.train.trajectories;
    if let Some(h) = data.heldout {
        all.extend(h.trajectories);
    }
    let ensemble = DensityEnsemble::from_buffer(&Buffer::new(all)?);
    let ou: OuParams = cfg.env.ou.clone();
    let psi = move |x: &[f64]| ou.potential([x[0], x[1]]);
    let beta_inv = cfg.env.ou.beta_inv();
    let series = jko::functional_series(&ensemble, &model, &psi, beta_inv, jko::DEFAULT_K)?;
    let mono = jko::check_free_energy_monotone(
        &ensemble,
        &psi,
        beta_inv,
        jko::DEFAULT_K,
        a.resamples,
        3.0,
        seed::derive(cfg.seed, 4),
    )?;

    let path = a.out_dir.join("functionals.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["t", "E", "S", "F", "H", "wH+b"]).map_err(csv_err)?;
    let fitted = series.fitted();
    for t in 0..series.free_energy.len() {
        w.write_record([
            t.to_string(),
            format!("{:?}", series.energy[t]),
            format!("{:?}", series.entropy[t]),
            format!("{:?}", series.free_energy[t]),
            format!("{:?}", series.h[t]),
            format!("{:?}", fitted[t]),
        ])
        .map_err(csv_err)?;
    }
    flush(w, &path)?;
    run.artifact(&path);
    let r = series.pearson();
    println!(
        "w = {:.6}, b = {:.6}, pearson = {r:.4}, F increases beyond 3 SE at {}/{} steps",
        series.w,
        series.b,
        mono.violations.len(),
        mono.increments.len()
    );
    run.summary(json!({
        "w": series.w,
        "b": series.b,
        "pearson": r,
        "violations": mono.violations,
        "steps": mono.increments.len(),
    }));
    run.finish(&a.out_dir.join("jko.run.json"))
}

// ---------------------------------------------------------------------------

pub fn selftest(out_dir: &Path) -> Result<(), CliError> {
    let mut run = Run::start("selftest");
    let mut results = Vec::new();
    let mut record = |name: &str, passed: bool, detail: String| {
        println!("{} {name}: {detail}", if passed { "ok    " } else { "FAILED" });
        results.push(json!({"name": name, "passed": passed, "detail": detail}));
    };

    for text in [
        include_str!("../../core/data/example1.chain"),
        include_str!("../../core/data/example2.chain"),
        include_str!("../../core/data/example3.chain"),
        include_str!("../../core/data/example4.chain"),
    ] {
        let f = chain::parse_chain_file(text)?;
        for c in templates::verify(&f.chain, f.params) {
            record(&c.name, c.passed, format!("max error {:.2e}", c.max_abs_err));
        }
    }

    let mut worst: f64 = 0.0;
    for trial in 0..10u64 {
        let mut model = init_mlp(3, &[5, 4], trial);
        let mut rng = seed::rng(trial);
        let states: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pairs: Vec<(&[f64], &[f64])> = (0..4)
            .map(|i| (&states[6 * i..6 * i + 3], &states[6 * i + 3..6 * i + 6]))
            .collect();
        let batch = Minibatch::from_pairs(3, &pairs)?;
        let (_, g) = loss_and_grad(&model, &batch, 0.5, PairRegularizer::Trajectory)?;
        let analytic: Vec<f64> = g.tensors().flat_map(|t| t.iter().copied()).collect();
        let mut k = 0;
        let count = model.tensors().count();
        for ti in 0..count {
            let len = model.tensors().nth(ti).map_or(0, |t| t.len());
            for i in 0..len {
                let mut at = |d: f64| {
                    model.tensors_mut().nth(ti).unwrap()[i] += d;
                    let l = loss_and_grad(&model, &batch, 0.5, PairRegularizer::Trajectory).map(|r| r.0);
                    model.tensors_mut().nth(ti).unwrap()[i] -= d;
                    l
                };
                let fd = (at(1e-5)? - at(-1e-5)?) / 2e-5;
                worst = worst.max((fd - analytic[k]).abs() / analytic[k].abs().max(1e-3));
                k += 1;
            }
        }
    }
    record("gradient check", worst < 1e-4, format!("max relative error {worst:.2e}"));

    let (h, exact) = entropy_selftest(7)?;
    record(
        "Gaussian entropy",
        (h - exact).abs() < 0.02,
        format!("estimate {h:.4}, exact {exact:.4}"),
    );

    let failed = results.iter().filter(|r| r["passed"] == false).count();
    create_dir(out_dir)?;
    run.summary(json!(results));
    run.finish(&out_dir.join("selftest.run.json"))?;
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} self-checks failed")));
    }
    Ok(())
}
