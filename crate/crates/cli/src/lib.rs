//! Command-line orchestration of the glycast pipeline: every command reads
//! one JSON config, writes its outputs under the configured `out`
//! directory and appends a run manifest.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{run, Command};
pub use config::{horizon_steps, Overrides, RunConfig};
pub use manifest::{RunManifest, MANIFEST_FILE};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GLYCAST_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("{THREADS_ENV} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
