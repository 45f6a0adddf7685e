use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = blocksgd::cli::Cli::parse();
    match blocksgd::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
