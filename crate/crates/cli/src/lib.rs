//! Command-line harness: dataset generation, training, evaluation and
//! parameter sweeps, with results written as CSV.

pub mod args;
pub mod commands;
pub mod error;
pub mod experiment;
pub mod report;
pub mod settings;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
pub use crate::error::{CliError, Result};

/// Runs the command line and returns the process exit code: 0 success,
/// 1 usage, 2 data error, 3 numeric failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::Generate { exp, out } => commands::generate(exp, out),
        Command::Train {
            exp,
            report,
            out,
            run_id,
        } => commands::train(exp, report, out.as_deref(), run_id.as_deref()),
        Command::Eval {
            exp,
            checkpoint,
            split,
        } => commands::eval(exp, checkpoint.as_deref(), split),
        Command::Sweep {
            exp,
            report,
            axis,
            values,
            models,
            seeds,
            out,
            runs_dir,
        } => commands::sweep(exp, report, axis, values, models, *seeds, out.as_deref(), runs_dir.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
