use std::process::ExitCode;

use clap::Parser;
use subquantum::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("subq: {e}");
            ExitCode::from(2)
        }
    }
}
