use std::process::ExitCode;

use clap::Parser;
use wsi_cli::args::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap would exit with 2, which is reserved for numerical failures.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match wsi_cli::configure_threads().and_then(|()| wsi_cli::run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
