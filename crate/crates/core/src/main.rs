use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use backsolve::cli::{parse_config, run_with_threads, write_csv};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Space-time least-squares solver for backward heat problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path`; results go to stdout if neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn execute(cli: Cli) -> backsolve::Result<()> {
    let Command::Run { config, output, seed, threads } = cli.command;
    let mut cfg = parse_config(&std::fs::read_to_string(&config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let results = run_with_threads(&cfg, threads)?;
    match output.or(cfg.output_path) {
        Some(path) => write_csv(&results, BufWriter::new(File::create(path)?)),
        None => write_csv(&results, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
