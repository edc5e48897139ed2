//! Batch driver for the prescribed curvature solver: JSON run
//! configurations, field files, and the `solve`, `curvature`, `spectrum`
//! and `verify` commands.

pub mod config;
pub mod curvature;
pub mod error;
pub mod field_io;
pub mod report;
pub mod solve;
pub mod spectrum;
pub mod verify;

pub use config::RunConfig;
pub use curvature::cmd_curvature;
pub use error::{exit, CliError, CliResult};
pub use report::RunReport;
pub use solve::{cmd_solve, run_solve};
pub use spectrum::cmd_spectrum;
pub use verify::cmd_verify;

/// Environment variable holding the worker thread count; `1` makes every
/// run bit-reproducible.
pub const THREADS_VAR: &str = "PRESCURV_THREADS";

/// Sizes the global rayon pool from [`THREADS_VAR`] when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
