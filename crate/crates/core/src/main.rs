use clap::Parser;
use kawadiff::cli::{run, Cli};
use kawadiff::Error;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // numerical guard trips
                Error::BlowUp(_) | Error::BoundViolation(_) | Error::InfiniteRate => {
                    ExitCode::from(2)
                }
                // validation and environment failures
                _ => ExitCode::from(1),
            }
        }
    }
}
