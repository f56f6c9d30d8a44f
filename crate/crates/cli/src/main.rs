//! `smot`: evaluation, synthetic data and tracking from the command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 input or config validation,
//! 3 pairing or consistency failure.

mod evaluate;
mod synth;
mod track;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smot_core::Error;

#[derive(Parser)]
#[command(name = "smot", version, about = "Small multi-object tracking evaluation and tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Generate synthetic curves or scenes.
    #[command(subcommand)]
    Synth(synth::SynthCommand),
    /// Track raw detections.
    Track(track::TrackArgs),
}

/// Failure carrying its exit code.
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn pairing(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn root_cause(e: &Error) -> &Error {
    match e {
        Error::InFile { source, .. } => root_cause(source),
        other => other,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match root_cause(&e) {
            Error::Pairing(_) | Error::ConfigMismatch(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

/// Writes `data` to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, data: &[u8]) -> CmdResult {
    match out {
        Some(p) => fs::write(p, data).map_err(|e| Failure::validation(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(data)
            .map_err(|e| Failure::internal(format!("stdout: {e}"))),
    }
}

/// Human-readable status: stdout when the payload went to a file, stderr
/// otherwise.
pub fn status(out: Option<&PathBuf>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => evaluate::run(args),
        Command::Synth(cmd) => synth::run(cmd),
        Command::Track(args) => track::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
