use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const FILE_NAME: &str = "manifest.json";

/// Written next to every run's outputs. Passing it back as `--config`
/// replays the run with the same resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    pub config: Config,
    pub seed: u64,
    pub workers: usize,
    pub tool_version: String,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    /// Hex SHA-256 of the resolved config.
    pub config_hash: String,
}
