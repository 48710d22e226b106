use std::process::ExitCode;

use clap::Parser;
use vidapprox_cli::args::{Cli, Command};
use vidapprox_cli::commands;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Segment(a) => commands::segment(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Randm(a) => commands::randm(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e);
            ExitCode::from(e.exit_code())
        }
    }
}
