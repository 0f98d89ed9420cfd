//! Run configuration: which environments and lexicons to load, the
//! generation plan, and output placement. A config file supplies defaults;
//! command-line flags win over the file.

use crate::CliError;
use orient_core::grid::{builtin_environment, GridEnvironment, BUILTIN_ENVIRONMENTS};
use orient_core::lexicon::{builtin_lexicon, Lexicon, BUILTIN_LEXICONS};
use orient_core::seed::fnv1a64;
use orient_core::GenerationPlan;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming a default config file.
pub const CONFIG_ENV_VAR: &str = "ORIENT_CONFIG";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Environment sources: `builtin:<name>` or a file path.
    pub environments: Vec<String>,
    /// Lexicon sources: `builtin:<tag>` or a file path.
    pub lexicons: Vec<String>,
    pub plan: GenerationPlan,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            environments: BUILTIN_ENVIRONMENTS
                .iter()
                .map(|n| format!("builtin:{n}"))
                .collect(),
            lexicons: BUILTIN_LEXICONS
                .iter()
                .map(|n| format!("builtin:{n}"))
                .collect(),
            plan: GenerationPlan::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Load from an explicit path, else from `ORIENT_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let source = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from),
        };
        match source {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", path.display()))
                })
            }
        }
    }

    /// Stable fingerprint of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

fn load_one_environment(source: &str) -> Result<GridEnvironment, CliError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin_environment(name).map_err(|e| CliError::Usage(e.to_string()));
    }
    if BUILTIN_ENVIRONMENTS.contains(&source) {
        return builtin_environment(source).map_err(|e| CliError::Usage(e.to_string()));
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::Usage(format!("cannot read environment {source}: {e}")))?;
    GridEnvironment::from_json(&text)
        .map_err(|e| CliError::Data(format!("environment {source}: {e}")))
}

pub fn load_environments(sources: &[String]) -> Result<Vec<GridEnvironment>, CliError> {
    sources.iter().map(|s| load_one_environment(s)).collect()
}

fn load_one_lexicon(source: &str) -> Result<Lexicon, CliError> {
    if let Some(tag) = source.strip_prefix("builtin:") {
        return builtin_lexicon(tag).map_err(|e| CliError::Usage(e.to_string()));
    }
    if BUILTIN_LEXICONS.contains(&source) {
        return builtin_lexicon(source).map_err(|e| CliError::Usage(e.to_string()));
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::Usage(format!("cannot read lexicon {source}: {e}")))?;
    Lexicon::from_json(&text).map_err(|e| CliError::Data(format!("lexicon {source}: {e}")))
}

pub fn load_lexicons(sources: &[String]) -> Result<Vec<Lexicon>, CliError> {
    sources.iter().map(|s| load_one_lexicon(s)).collect()
}
