use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Written next to the outputs of every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
    pub duration_secs: f64,
}

pub struct Run {
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    pub fn start(subcommand: &str) -> Self {
        Self {
            manifest: RunManifest {
                subcommand: subcommand.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: None,
                config: Value::Null,
                artifacts: Vec::new(),
                summary: Value::Null,
                duration_secs: 0.0,
            },
            start: Instant::now(),
        }
    }

    pub fn config(&mut self, config: Value, seed: Option<u64>) {
        self.manifest.config = config;
        self.manifest.seed = seed;
    }

    pub fn artifact(&mut self, path: &Path) {
        self.manifest.artifacts.push(path.to_path_buf());
    }

    pub fn summary(&mut self, summary: Value) {
        self.manifest.summary = summary;
    }

    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.duration_secs = self.start.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest).map_err(arrowtime::Error::from)?;
        std::fs::write(path, text + "\n").map_err(|e| arrowtime::Error::io(path, e))?;
        Ok(())
    }
}
