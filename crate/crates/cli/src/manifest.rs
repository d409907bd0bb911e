use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, Utc};
use serde::Serialize;

/// Record of one command invocation. Written after every other artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub artifacts: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, started_at: DateTime<Utc>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            started_at,
            finished_at: started_at,
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Stamps the finish time and writes the manifest to `path`.
    pub fn write(mut self, path: &Path) -> anyhow::Result<()> {
        self.finished_at = Utc::now();
        self.artifacts.push(path.to_path_buf());
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
