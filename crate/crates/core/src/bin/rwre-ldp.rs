use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwre_ldp::cli::{run, RunOptions};

#[derive(Parser)]
#[command(name = "rwre-ldp", version, about = "Quenched rate functions for random walks in random environments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a JSON config.
    Run {
        config: PathBuf,
        /// Treat statistical gate failures and warnings as errors (exit 4).
        #[arg(long)]
        strict: bool,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config, strict, out, threads } => {
            let outcome = run(&config, &RunOptions { strict, out, threads });
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
    }
}
