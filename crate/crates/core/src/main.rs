use std::process::ExitCode;

use clap::Parser;
use kw_core::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    ExitCode::from(run(&cli, &mut stdout))
}
