use std::process::ExitCode;

use clap::Parser;
use twindann_cli::commands::{run, Cli};
use twindann_cli::exit_code;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()) as u8)
        }
    }
}
