//! `blockterm` command-line front end.
//!
//! Every command prints exactly one JSON object on standard output; progress
//! and diagnostics go to standard error. Exit codes: 0 success, 2 I/O,
//! 3 invalid configuration or arguments, 4 numerical status (the run did not
//! converge; artifacts are still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Environment variable naming the base directory for command outputs.
pub const OUT_ENV: &str = "BLOCKTERM_OUT";

#[derive(Parser, Debug)]
#[command(name = "blockterm", version, about = "Tensor decompositions and common/individual feature separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose an order-3 DTF1 tensor and write a factor bundle.
    Decompose(commands::DecomposeArgs),
    /// Split observations into common and individual parts using an LL1 bundle.
    Split(commands::SplitArgs),
    /// Run a classification experiment described by a JSON config.
    Experiment(commands::ExperimentArgs),
    /// Write a synthetic dataset.
    Synth(commands::SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cpd,
    Hosvd,
    Ll1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    ColorEnsemble,
    FaceFixture,
}

/// A command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

fn exit_code(e: &blockterm::Error) -> u8 {
    use blockterm::Error::*;
    match e {
        Io(_) | Format { .. } => 2,
        NnlsNonConvergence { .. } => 4,
        Term { source, .. } | Group { source, .. } => exit_code(source),
        _ => 3,
    }
}

impl From<blockterm::Error> for Failure {
    fn from(e: blockterm::Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

/// Where a command writes when `--out` is absent.
pub fn default_out(command: &str) -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("blockterm-out")).join(command)
}

fn emit(value: &serde_json::Value) {
    println!("{value}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            emit(&json!({ "status": "error", "code": 3, "message": first }));
            return ExitCode::from(3);
        }
    };
    let (name, result) = match cli.command {
        Command::Decompose(a) => ("decompose", commands::decompose(a)),
        Command::Split(a) => ("split", commands::split(a)),
        Command::Experiment(a) => ("experiment", commands::experiment(a)),
        Command::Synth(a) => ("synth", commands::synth(a)),
    };
    match result {
        Ok((code, mut summary)) => {
            summary["command"] = json!(name);
            emit(&summary);
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("blockterm {name}: error: {}", f.message);
            emit(&json!({ "command": name, "status": "error", "code": f.code, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
