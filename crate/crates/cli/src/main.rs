use std::process::ExitCode;

use clap::Parser;
use sdr_cli::commands::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(sdr_cli::exit_code(&err) as u8)
        }
    }
}
