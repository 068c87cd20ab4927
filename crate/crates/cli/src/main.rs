use std::process::ExitCode;

use clap::Parser;
use covdist_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("covdist: {e}");
            ExitCode::from(e.code)
        }
    }
}
