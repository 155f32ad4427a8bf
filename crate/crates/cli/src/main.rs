mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Failure;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    if let Err(f) = configure_threads() {
        eprintln!("error: {f}");
        return ExitCode::from(f.code());
    }
    ExitCode::from(dispatch(&argv))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("BLURFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Argument(format!("BLURFORGE_THREADS must be a count, got {raw:?}")))?;
    blurforge::exec::init_thread_pool(n).map_err(Failure::Argument)
}

/// Parse, run, write the manifest and map the outcome to an exit code.
pub fn dispatch(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::Replay(r) => manifest::replay(&r.manifest_path),
        _ => manifest::run_recorded(argv, &cli),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}
