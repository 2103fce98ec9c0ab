use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xrsched_cli::{config::FileConfig, instance, run_simulate, CliError};

#[derive(Parser)]
#[command(
    name = "xrsched",
    version,
    about = "Multi-cell downlink scheduling simulator for PDU-set-aware XR traffic"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured sweep and write figure-data CSVs plus a summary.
    Simulate {
        /// Experiment TOML; an empty file means defaults.
        #[arg(long)]
        config: PathBuf,
        /// CI-scale profile: 4 cells, 3 drops, 5 s, lighter frames,
        /// boosted serving links.
        #[arg(long)]
        fast: bool,
        /// Output directory (XRSCHED_OUT overrides; default from config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default from config; 0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve a small single-cell instance exactly and compare the per-TTI
    /// heuristic against the optimum.
    Oracle {
        /// Instance TOML.
        #[arg(long)]
        instance: PathBuf,
    },
    /// Parse and validate an experiment TOML, then print its fingerprint.
    ValidateConfig {
        /// Experiment TOML to check.
        config: PathBuf,
    },
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Simulate { config, fast, out, workers } => {
            let paths = run_simulate(&config, fast, out.as_deref(), workers)?;
            let (drops, rest): (Vec<_>, Vec<_>) =
                paths.iter().partition(|p| p.parent().is_some_and(|d| d.ends_with("drops")));
            if let Some(first) = drops.first() {
                println!("{} per-run records under {}", drops.len(), first.parent().unwrap().display());
            }
            for p in rest {
                println!("{}", p.display());
            }
            Ok(())
        }
        Cmd::Oracle { instance: path } => {
            let inst = instance::load_instance(&path)?;
            print!("{}", instance::oracle_report(&inst)?);
            Ok(())
        }
        Cmd::ValidateConfig { config } => {
            let file = FileConfig::load(&config)?;
            file.validate()?;
            println!("ok config_hash={:016x}", file.config_hash());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
