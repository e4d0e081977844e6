use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// What produced an output file. Thread counts and output paths are left
/// out: neither may change the results.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ExperimentConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Anything else the subcommand reads, as `key=value` strings.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl ExperimentConfig {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            ..Self::default()
        }
    }
}
