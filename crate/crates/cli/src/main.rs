//! `halfline`: certify, solve, verify or sweep a problem given as JSON.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod modes;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use halfline_core::Error;

use config::Config;
use modes::Mode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::InadmissibleWeight { .. }) => modes::EXIT_INADMISSIBLE,
            CliError::Core(Error::NotContractive { .. }) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "halfline",
    version,
    about = "Weighted half-line solver for fourth-order operator-differential equations"
)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = Config::load(&args.config).and_then(|mut config| {
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        modes::run(&config, args.mode, &args.out)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("halfline: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
