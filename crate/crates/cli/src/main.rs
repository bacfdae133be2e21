//! `richness` command-line tool.
//!
//! Exit status: 0 success, 1 runtime error, 2 configuration error (bad flag,
//! unreadable input path, unwritable output), 3 fit completed but convergence
//! diagnostics warn, 4 dataset or hierarchy violations.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use richness_core::Error;

pub const EXIT_HARD: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOFT_FAIL: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn hard(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_HARD,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Level(_) | Error::Timeslice(_) | Error::EmptySlice { .. } => {
                Failure::config(e.to_string())
            }
            Error::UnmodelledCategory(_) | Error::InvalidHierarchy(_) => Failure::validation(e.to_string()),
            other => Failure::hard(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    let command = &cli.command;
    let outcome = command.args().resolve().and_then(|cfg| match command {
        config::Command::Fit(_) => commands::fit(&cfg),
        config::Command::Timeslice(_) => commands::timeslice(&cfg),
        config::Command::Validate(_) => commands::validate(&cfg),
        config::Command::Summarize(_) => commands::summarize_chains(&cfg),
    });
    match outcome {
        Ok(done) if done.healthy => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("{}: convergence diagnostics failed; results written but not trustworthy", command.name());
            ExitCode::from(EXIT_SOFT_FAIL)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
