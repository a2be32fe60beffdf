//! Experiment harness and subcommands of the `freetrans` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod recipes;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use output::RunRecord;
pub use recipes::run_experiment;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FREETRANS_THREADS";

/// Size the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size the thread pool: {e}")))
}
