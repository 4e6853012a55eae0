use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = camloc::cli::Cli::parse();
    match camloc::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
