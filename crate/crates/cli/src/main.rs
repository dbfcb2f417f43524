use std::process::ExitCode;

use clap::Parser;
use lpdev_cli::Cli;

fn main() -> ExitCode {
    lpdev_cli::main_with(Cli::parse())
}
