//! `gigaudit` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or
//! configuration, 3 no usable data, 4 weak or missing salt.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Audit(a) => commands::audit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Anon(a) => commands::anon(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gigaudit: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
