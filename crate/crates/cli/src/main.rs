mod args;
mod commands;
mod config;
mod error;
mod gen;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 0 for --help/--version and 2 for usage errors
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Svd(a) => commands::svd(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Complete(a) => commands::complete(a),
        Command::Pca(a) => commands::pca(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rsvdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
