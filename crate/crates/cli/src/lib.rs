//! Batch runner behind the `fluxprobe` binary: builds the configured medium,
//! runs one subcommand and writes CSV/JSON artifacts stamped with the
//! config hash.

pub mod backend;
pub mod commands;
pub mod config;
pub mod output;

use serde_json::json;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] fluxprobe::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Unsupported(_) => "unsupported",
            CliError::ChecksFailed { .. } => "checks-failed",
            CliError::Core(e) => match e {
                fluxprobe::Error::GrazingSingularity => "grazing-singularity",
                fluxprobe::Error::DimensionMismatch(_) => "dimension-mismatch",
                fluxprobe::Error::Validation { .. } => "validation",
                fluxprobe::Error::CoincidentPoints => "coincident-points",
                fluxprobe::Error::SolverDivergence { .. } => "solver-divergence",
                fluxprobe::Error::OrderUndetermined { .. } => "order-undetermined",
                fluxprobe::Error::DegenerateTestFunction { .. } => "degenerate-test-function",
                fluxprobe::Error::DegenerateInitialization { .. } => "degenerate-initialization",
                fluxprobe::Error::Divergence { .. } => "divergence",
                fluxprobe::Error::Backend { .. } => "backend",
                fluxprobe::Error::Format(_) => "format",
                fluxprobe::Error::Io(_) => "io",
                fluxprobe::Error::Csv(_) => "csv",
            },
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
        }
    }

    /// The document printed to stderr on failure.
    pub fn document(&self, command: &str) -> serde_json::Value {
        json!({
            "status": "error",
            "command": command,
            "error": { "kind": self.kind(), "message": self.to_string() },
        })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed { .. } => 1,
            _ => 2,
        }
    }
}
