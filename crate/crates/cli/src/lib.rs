//! Command-line surface of `lpdev`: sampling, rate tables, Monte-Carlo runs
//! with a persistent record store, verification suites and KLS probes.

pub mod args;
pub mod commands;
pub mod config;
pub mod store;
pub mod verify;

use std::fmt;
use std::process::ExitCode;

pub use args::{Cli, Command};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Verification failure (exit 1).
    Verify(String),
    /// Invalid flags or inputs (exit 2).
    Usage(String),
    /// Mathematical degeneracy or numerical failure (exit 3).
    Degenerate(String),
    /// Store or file I/O (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<lpdev::Error> for CliError {
    fn from(e: lpdev::Error) -> Self {
        match e {
            lpdev::Error::Usage(m) | lpdev::Error::Domain(m) => CliError::Usage(m),
            lpdev::Error::Degenerate(m) => CliError::Degenerate(m),
            e @ lpdev::Error::Numerical { .. } => CliError::Degenerate(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs a parsed command, writing to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => commands::sample(&a, out),
        Command::Rate(a) => commands::rate(&a, out),
        Command::Mc(a) => commands::mc(&a, out),
        Command::Verify(a) => commands::verify(&a, out),
        Command::Probe(a) => commands::probe(&a, out),
    }
}

/// Entry point shared by the binary: runs and maps errors to exit codes.
pub fn main_with(cli: Cli) -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = std::io::BufWriter::new(stdout.lock());
    let res = run(cli, &mut lock);
    let flushed = std::io::Write::flush(&mut lock);
    match (res, flushed) {
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
        (Err(e), _) => {
            drop(lock);
            eprintln!("lpdev: {e}");
            ExitCode::from(e.exit_code())
        }
        (Ok(()), Err(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        (Ok(()), Err(e)) => {
            eprintln!("lpdev: i/o error: {e}");
            ExitCode::from(4)
        }
    }
}

pub(crate) fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}
