//! Command-line front end: CSV in, JSON or TSV out.

pub mod args;
pub mod commands;
pub mod error;
pub mod input;

pub use error::{CliError, Result};
pub use input::{load_csv, CsvData};

use args::{Command, OutArgs};

/// Runs one subcommand and writes its output.
pub fn run(command: &Command) -> Result<()> {
    let (text, out) = match command {
        Command::Fit(a) => (commands::fit(a)?, &a.out),
        Command::Identify(a) => (commands::identify_cmd(a)?, &a.out),
        Command::Infer(a) => (commands::infer(a)?, &a.out),
        Command::Simulate(a) => (commands::simulate(a)?, &a.out),
    };
    write_output(&text, out)
}

fn write_output(text: &str, out: &OutArgs) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Caps the rayon pool at `WSI_THREADS` workers when the variable is set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("WSI_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return Err(CliError::Usage(format!("WSI_THREADS must be a positive integer, got '{v}'"))),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}
