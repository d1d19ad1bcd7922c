mod args;
mod commands;
mod error;
mod keys;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Golden(a) => commands::golden(a),
        Command::Bench(a) => commands::bench(a),
        Command::Ioi(a) => commands::ioi(a),
        Command::BuildDr(a) => commands::build_dr(a),
        Command::BuildOpf(a) => commands::build_opf(a),
        Command::Keygen(a) => commands::keygen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
