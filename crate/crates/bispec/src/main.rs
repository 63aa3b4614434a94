use std::process::ExitCode;

use bispec::commands::{run, Cli};
use bispec::error::{CliError, EXIT_PARAMETER};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARAMETER } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match (&e, e.stage()) {
                (CliError::Core(c), Some(stage)) => {
                    eprintln!("bispec: error in stage {stage}: {}", c.root())
                }
                _ => eprintln!("bispec: error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
