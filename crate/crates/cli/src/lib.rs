//! File formats, configuration and the command-line driver around
//! `lingen-core`.

pub mod args;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod conllu;
pub mod data;
pub mod error;
pub mod vemb;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::{EXIT_OK, EXIT_USAGE};

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("lingen: error: {e}");
            e.exit_code()
        }
    }
}
