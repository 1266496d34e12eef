use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mhflab::experiments::{run, RunRequest};

/// Runs one verification suite from a JSON configuration.
#[derive(Debug, Parser)]
#[command(name = "mhflab", version)]
struct Cli {
    /// commutator-sweep, b-sweep, weyl, clr, agmon, diamagnetic, wigner, hf-evolve, mb-compare or identities
    suite: String,
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output_dir, then results/<suite>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points
    #[arg(long, env = "MHFLAB_WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&RunRequest {
        suite: cli.suite,
        config: cli.config,
        out: cli.out,
        workers: cli.workers,
    });
    if !outcome.report.is_empty() {
        print!("{}", outcome.report);
    }
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    if let Some(dir) = &outcome.out_dir {
        eprintln!("outputs written to {}", dir.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
