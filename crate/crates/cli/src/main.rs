use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use nls_lab::{run, RunOptions};

#[derive(Parser)]
#[command(name = "nls-lab", version, about = "Simulate, classify and estimate thresholds for NLS models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the run described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomized restarts (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long, env = "NLS_LAB_THREADS")]
        threads: Option<usize>,
        /// Suppress progress messages on stderr.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                // usage errors are config errors; 2 is reserved for hypothesis refusals
                _ => ExitCode::from(1),
            };
        }
    };
    let Cmd::Run { config, out, seed, threads, quiet } = cli.command;
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("nls-lab: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("nls-lab: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let report = run(&config, &RunOptions { out, seed, quiet });
    if !quiet && report.exit_code == 0 {
        eprintln!("nls-lab: wrote {} files to {}", report.outputs.len(), report.out_dir.display());
    }
    ExitCode::from(report.exit_code as u8)
}
