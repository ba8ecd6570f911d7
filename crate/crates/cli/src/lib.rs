//! File formats, configuration and batch commands around `crowdprior-core`.
//!
//! The `crowdprior` binary is a thin wrapper over [`run_cli`].

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{Command, Context};
pub use config::{Overrides, PipelineConfig, PriorKind};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "crowdprior", version, about = "Dirichlet soft labels from crowd responses")]
pub struct Cli {
    /// TOML pipeline configuration; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Resolves the configuration for parsed arguments.
pub fn resolve(cli: &Cli) -> Result<Context> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&cli.overrides);
    Context::new(cfg)
}

/// Parses arguments, runs one command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(&cli).and_then(|ctx| commands::run(&ctx, &cli.command)) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
