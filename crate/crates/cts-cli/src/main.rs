use anyhow::Result;
use clap::Parser;

use cts_cli::{run_with_threads, Command, RunConfig};

/// Correlation tensor spectra pipeline for temporal transaction networks.
#[derive(Parser)]
#[command(name = "cts", version, about)]
struct Cli {
    /// Subcommand: synth, ingest, embed, spectra, null, analyze, drivers, all.
    subcommand: String,

    /// Path to the TOML run configuration.
    #[arg(long, default_value = "cts.toml")]
    config: std::path::PathBuf,

    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Cap worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let command = Command::parse(&cli.subcommand)?;
    let mut config = RunConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.run.threads = threads;
    }
    let outcomes = run_with_threads(command, &config, config.run.threads)?;
    for outcome in outcomes {
        println!(
            "[{}] {}",
            outcome.stage,
            if outcome.cache_hit { "cache hit" } else { "done" }
        );
    }
    Ok(())
}
