//! Command-line front end for `xaikit-core`: `.npy` and image I/O, JSON
//! reports, and the subprocess predictor protocol.

pub mod cli;
mod commands;
pub mod error;
pub mod image;
pub mod npy;
pub mod predictor;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::segloss::{gradient_balance, BalanceCheck};
pub use error::{CliError, CliResult};

use crate::cli::{Cli, Command};

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let rendered = e.to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            eprintln!("xaikit: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    if let Command::PredictorStub(s) = &cli.command {
        return predictor::run_stub(s.mode, s.after);
    }
    if cli.threads == 0 {
        eprintln!("xaikit: --threads must be at least 1");
        return 2;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("xaikit: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| commands::dispatch(cli.command, cli.timing)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("xaikit: {}", single_line(&e));
            e.exit_code()
        }
    }
}

fn single_line(e: &CliError) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        source = s.source();
    }
    msg.replace('\n', " ")
}
