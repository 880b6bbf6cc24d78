use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use morseflow::cli::{run, Subcommand};

/// Morse homology and flow-current engine over TOML run configs.
#[derive(Parser)]
#[command(name = "morseflow", version)]
struct Args {
    /// Pipeline stage: critical-points, connections, complex, homology,
    /// residues, verify-fme, pairing, report or all.
    subcommand: Subcommand,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report, CSV exports and the cache.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    /// Ignore cached intermediates (results are still written back).
    #[arg(long)]
    no_cache: bool,
    /// Progress logging to stderr.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(
        &args.config,
        &args.out,
        args.subcommand,
        args.no_cache,
        args.verbose,
    ) {
        Ok(outcome) => {
            if outcome.verification_failures.is_empty() {
                println!("ok: report at {}", outcome.report_path.display());
                ExitCode::SUCCESS
            } else {
                for failure in &outcome.verification_failures {
                    eprintln!("verification failure: {failure}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
