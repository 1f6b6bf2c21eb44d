//! Command-line orchestration for `qtat-core`: subcommands, experiment
//! configs and deterministic pipelines with checksummed manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod workflow;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, Manifest};

/// Sizes the global rayon pool; `None` keeps the hardware default.
pub fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}
