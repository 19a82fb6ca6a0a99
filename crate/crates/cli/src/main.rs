mod args;
mod artifacts;
mod commands;
mod config;
mod error;
mod output;
mod report;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};

use crate::args::Cli;
use crate::error::{CliError, EXIT_USAGE};

fn override_self(cmd: clap::Command) -> clap::Command {
    cmd.args_override_self(true).mut_subcommands(override_self)
}

fn fail(e: &CliError) -> i32 {
    eprintln!("{}", serde_json::to_string(e).expect("error serializes"));
    e.exit_code
}

fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let parsed = override_self(Cli::command())
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            return fail(&CliError { error: "usage".into(), message: e.kind().to_string(), exit_code: EXIT_USAGE });
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}
