use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::config::RunConfig;

/// Record of one invocation: rerunning `command` with `config` and `seed`
/// reproduces every output byte for byte. Only the timestamps change.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(config: &RunConfig, seed: u64, workers: usize, started: DateTime<Utc>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            seed,
            workers,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: String::new(),
        }
    }

    pub fn write(mut self, path: &Path) -> anyhow::Result<()> {
        self.finished_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
        let text = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(path, text)?;
        Ok(())
    }
}
