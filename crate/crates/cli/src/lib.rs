//! Experiment driver for the xrsched simulator: TOML configs in, figure-data
//! CSVs and a run summary out, plus an exact-solver oracle for small
//! single-cell instances.

pub mod config;
pub mod instance;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    /// Process exit code category: 2 config, 3 io, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "XRSCHED_OUT";

/// Output directory precedence: environment override, then the command-line
/// flag, then the config file.
pub fn resolve_out_dir(flag: Option<&Path>, cfg_dir: &str) -> PathBuf {
    if let Ok(env_dir) = std::env::var(OUT_ENV) {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    flag.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(cfg_dir))
}

/// Parse, apply the profile, validate, sweep, and write artifacts.
/// Returns the paths written.
pub fn run_simulate(
    config_path: &Path,
    fast: bool,
    out_flag: Option<&Path>,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut file = config::FileConfig::load(config_path)?;
    if fast {
        file.apply_fast();
    }
    file.validate()?;
    let hash = file.config_hash();
    let out_dir = resolve_out_dir(out_flag, &file.output_dir);
    let workers = workers.unwrap_or(file.workers as usize);
    let results = sweep::run_sweep(&file, workers)?;
    if !fast && results.min_counted_sets() < output::SAMPLE_FLOOR_SETS {
        eprintln!(
            "warning: thinnest XR UE collected {} counted PDU-sets (< {}); satisfaction statistics are undersampled",
            results.min_counted_sets(),
            output::SAMPLE_FLOOR_SETS,
        );
    }
    output::write_outputs(&results, &file, hash, file.seed, fast, &out_dir)
}
