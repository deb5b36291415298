//! `rsf`: synthesize, estimate, and sweep stepped-frequency radar scenarios.

mod args;
mod commands;
mod progress;

use std::process::ExitCode;

use clap::Parser;
use rsf_core::RsfError;

use args::{Cli, Command};

fn exit_code(err: &RsfError) -> u8 {
    if err.is_validation() {
        2
    } else if err.is_io() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Synth(a) => commands::synth(&cli, a),
        Command::Theory(a) => commands::theory(&cli, a),
        Command::Estimate(a) => commands::estimate(&cli, a),
        Command::Sweep => commands::sweep(&cli, None),
        Command::Figure(a) => commands::sweep(&cli, Some(&a.preset)),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
