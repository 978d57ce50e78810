use std::process::ExitCode;

use clap::Parser;
use phonecal::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phonecal: {e}");
            ExitCode::FAILURE
        }
    }
}
