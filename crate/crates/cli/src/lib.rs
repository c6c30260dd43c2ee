//! Pipelines behind the `qst` command: dataset generation with manifests,
//! measurement and noise on files, classifier training, reconstruction and
//! the benchmark harness.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod io;
pub mod ops;

pub use commands::{run, Cli};
pub use error::{CliError, Result};

/// Sizes the global rayon pool from `QST_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("QST_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config(format!("QST_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))
}
