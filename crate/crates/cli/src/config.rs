//! Run configuration: the model config plus the file paths and options a
//! run needs. Unknown keys are rejected so typos fail loudly; command-line
//! flags override config values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dmmh_core::model::ModelConfig;

use crate::CliError;

fn default_ranker() -> String {
    "bucket".to_string()
}

fn default_precision_at() -> Vec<usize> {
    vec![1, 5, 10]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Dataset manifest path, relative to this config's directory.
    pub manifest: PathBuf,
    /// Checkpoint path written by `train`, read by `encode`.
    pub checkpoint: PathBuf,
    /// Default code bank output for `encode`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codes: Option<PathBuf>,
    /// Default report output for `eval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default = "default_ranker")]
    pub ranker: String,
    #[serde(default = "default_precision_at")]
    pub precision_at: Vec<usize>,
}

impl RunConfig {
    /// Reads the config and resolves its relative paths against the
    /// config file's directory.
    pub fn read(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        config.manifest = resolve(dir, &config.manifest);
        config.checkpoint = resolve(dir, &config.checkpoint);
        config.codes = config.codes.map(|p| resolve(dir, &p));
        config.report = config.report.map(|p| resolve(dir, &p));
        Ok(config)
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}
