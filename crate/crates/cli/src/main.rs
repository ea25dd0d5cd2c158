//! `rwre`: command-line driver for the random-walk homogenization estimator.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage, 3 invalid parameter or
//! law, 4 draw budget exceeded, 5 read or write failure, 6 check failed.

mod args;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use run::{execute, resolve, CliError, SEED_ENV_VAR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let msg = first.trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(msg));
            return ExitCode::from(2);
        }
    };
    let outcome = resolve(&cli.command, std::env::var(SEED_ENV_VAR).ok())
        .and_then(|(resolved, exec)| execute(&cli.command, &resolved, &exec));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", CliError::new("check_failed", 6, "oracle check failed"));
            ExitCode::from(6)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
