//! `cilp`: generate synthetic decision datasets, train linear cost models
//! from observed decisions, evaluate them and inspect single projections.

mod args;
mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::FileConfig;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Generate(a) => commands::generate(a, &cfg),
        Command::Train(a) => commands::train(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Project(a) => commands::project(a, &cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
