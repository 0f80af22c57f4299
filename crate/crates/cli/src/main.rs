use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

#[derive(Parser)]
#[command(name = "arrowtime", version, about = "Arrow-of-time potentials for MDPs")]
struct Cli {
    /// Worker threads for rollouts and estimators (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed. Falls back to ARROWTIME_SEED, then to the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct ConfigArgs {
    /// Config file (`key = value` lines, `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set env.vases.density=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a Markov chain file under both regularizers.
    Analytic {
        chain: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Roll out the random policy and dump the trajectories as CSV.
    Rollout {
        /// Environment kind.
        #[arg(long, default_value = "vases")]
        env: String,
        #[arg(long, short = 'm', default_value_t = 64)]
        trajectories: usize,
        #[arg(long, short = 'n', default_value_t = 128)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train an h-potential.
    Train {
        /// Start from this environment's preset.
        #[arg(long, default_value = "vases")]
        env: String,
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a checkpoint along dumped trajectories.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Safety penalty scale.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Use a step transfer with this threshold instead of the identity.
        #[arg(long)]
        step_threshold: Option<f64>,
        /// Running-average momentum of the tomato reward.
        #[arg(long, default_value_t = 0.95)]
        momentum: f64,
        /// Also write histograms of h at t = 0, N/4 and N.
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Compare the learned potential with the free energy of the OU process.
    Jko {
        #[arg(long)]
        out_dir: PathBuf,
        /// Use this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Turn the noise off.
        #[arg(long)]
        drift_only: bool,
        /// Check the entropy estimator on Gaussian samples first.
        #[arg(long)]
        entropy_selftest: bool,
        /// Bootstrap resamples for the monotonicity check.
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fast numerical self-checks.
    Selftest {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
    Other(String),
}

impl From<arrowtime::Error> for CliError {
    fn from(e: arrowtime::Error) -> Self {
        use arrowtime::Error as E;
        match e {
            E::InvalidChain(_)
            | E::Parse { .. }
            | E::Config(_)
            | E::UnknownEnv(_)
            | E::Dimension { .. }
            | E::Checkpoint(_)
            | E::Io { .. }
            | E::Csv(_)
            | E::Json(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Check(m) | CliError::Other(m) => m,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| arrowtime::Error::io(path, e).into())
}

/// Seed from the flag, else ARROWTIME_SEED.
fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("ARROWTIME_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ARROWTIME_SEED is not an integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let seed = seed_override(cli.seed)?;
    let from_flag = cli.seed.is_some();
    match cli.command {
        Command::Analytic { chain, out_dir } => commands::analytic(&chain, &out_dir),
        Command::Rollout {
            env,
            trajectories,
            length,
            out,
            config,
        } => commands::rollout(&env, trajectories, length, &out, &config, seed, from_flag),
        Command::Train {
            env,
            out_dir,
            resume,
            config,
        } => commands::train(&env, &out_dir, resume.as_deref(), &config, seed, from_flag),
        Command::Eval {
            checkpoint,
            dump,
            out,
            beta,
            step_threshold,
            momentum,
            hist,
            bins,
        } => commands::eval(commands::EvalArgs {
            checkpoint: &checkpoint,
            dump: &dump,
            out: &out,
            beta,
            step_threshold,
            momentum,
            hist: hist.as_deref(),
            bins,
        }),
        Command::Jko {
            out_dir,
            checkpoint,
            drift_only,
            entropy_selftest,
            resamples,
            config,
        } => commands::jko(commands::JkoArgs {
            out_dir: &out_dir,
            checkpoint: checkpoint.as_deref(),
            drift_only,
            entropy_selftest,
            resamples,
            config: &config,
            seed,
            seed_from_flag: from_flag,
        }),
        Command::Selftest { out_dir } => commands::selftest(&out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
