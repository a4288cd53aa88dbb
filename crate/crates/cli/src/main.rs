use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use watchlab::{exit_code, init_threads, load_config, run, Stage};

#[derive(Parser)]
#[command(name = "watchlab", version, about = "Duration-debiased watch-time label experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its ground-truth sidecar.
    Generate(Common),
    /// Fit bias/noise curves and write labelled datasets.
    Correct(Common),
    /// Train one model per label set and evaluate on the test split.
    TrainEval(Common),
    /// Write plot data from curves and sweep results.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Generate(a) => (Stage::Generate, a),
        Command::Correct(a) => (Stage::Correct, a),
        Command::TrainEval(a) => (Stage::TrainEval, a),
        Command::Report(a) => (Stage::Report, a),
    };
    let result = init_threads()
        .map_err(anyhow::Error::from)
        .and_then(|()| Ok(load_config(&args.config, args.seed, args.out)?))
        .and_then(|config| run(stage, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
