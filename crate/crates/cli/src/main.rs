use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lcs_cli::{Command, RunConfig, Stage};

/// Local causal state reconstruction and forecasting of coupled map lattices.
#[derive(Debug, Parser)]
#[command(name = "lcs", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Work directory; overrides `work_dir` from the config.
    #[arg(long)]
    work: Option<PathBuf>,
    /// Replaces the lattice seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(seed) = cli.seed_override {
        config.seed = seed;
    }
    let work = cli.work.unwrap_or_else(|| config.work_dir.clone());
    match Stage::new(&config, work).run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
