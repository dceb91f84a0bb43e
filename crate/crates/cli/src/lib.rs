//! Scenario runner, sweeps and detector-operator reports.

pub mod config;
pub mod engines;
pub mod error;
pub mod output;
pub mod povm_cmd;
pub mod scenarios;
pub mod sweep;

pub use error::{CliError, CliResult};

/// Worker count from `TPD_WORKERS`, else the available parallelism.
pub const WORKERS_ENV: &str = "TPD_WORKERS";

pub fn init_workers() {
    let n = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size worker pool: {e}");
        }
    }
}
