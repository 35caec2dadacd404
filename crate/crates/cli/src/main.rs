use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use lagmesh_cli::config::{resolve, Args, OUT_ENV};
use lagmesh_cli::{output, CliError};

fn run() -> Result<(), CliError> {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default();
            return Err(CliError::Usage(first.trim_start_matches("error: ").to_owned()));
        }
    };
    let cfg = resolve(args, std::env::var_os(OUT_ENV).map(PathBuf::from))?;
    output::execute(&cfg, &mut std::io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
