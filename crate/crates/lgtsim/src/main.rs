use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lgtsim::{exit_code, run, THREADS_ENV};
use qudit_lgt::config::{ExperimentConfig, PRESETS};
use qudit_lgt::Error;

/// Runs lattice gauge theory experiments and writes their data files.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run {
        config: PathBuf,
        /// Overrides the config's `out` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset.
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// List the built-in presets.
    Presets,
}

fn threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Parse(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    threads()?;
    let (cfg, out) = match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("ok: {} ({:?})", config.display(), cfg.experiment);
            return Ok(());
        }
        Command::Presets => {
            PRESETS.iter().for_each(|p| println!("{p}"));
            return Ok(());
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.out.clone());
            (cfg, out)
        }
        Command::Preset { name, out } => (ExperimentConfig::from_preset(&name)?, out),
    };
    for p in run(&cfg, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lgtsim: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
