//! Command-line front end for the smp toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or data error,
//! 3 verification failure.

mod bench;
mod common;
mod gen;
mod train;
mod verify;

use clap::error::ErrorKind;
use clap::Parser;
use common::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "smp",
    version,
    about = "Graph representation learning with stochastically augmented linear propagation",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Subcommand, Debug)]
enum Cmd {
    /// Write a synthetic dataset (edge list, plus labels where defined).
    Gen(gen::GenArgs),
    /// Train a model over one or more seeds and report test metrics.
    Train(Box<train::TrainArgs>),
    /// Check the structural claims (chi distances, equivariance,
    /// twin collapse/separation, proximity recovery) on a graph.
    Verify(verify::VerifyArgs),
    /// Time one training epoch per model variant.
    Bench(bench::BenchArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(args) => gen::run(args),
        Cmd::Train(args) => train::run(*args),
        Cmd::Verify(args) => verify::run(args),
        Cmd::Bench(args) => bench::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Verification) => 3,
    }
}
