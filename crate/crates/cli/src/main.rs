use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod calibrate;
mod gen;
mod run;

#[derive(Parser)]
#[command(name = "ecomod", version, about = "Fuel-aware ride-sharing fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic grid network, a request list and a scenario file.
    Gen(gen::GenArgs),
    /// Run a sweep of configurations x fleet sizes x seeds.
    Run(run::RunArgs),
    /// Calibrate OD flows from link speed samples and a prior.
    Calibrate(calibrate::CalibrateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen::gen(&a),
        Command::Run(a) => run::run(&a),
        Command::Calibrate(a) => calibrate::calibrate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create_dir(dir: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))
}
