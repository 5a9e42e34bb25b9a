#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::Output;

const USAGE_EXIT: u8 = 64;

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("hairlab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => USAGE_EXIT,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = hairlab::par::with_env_threads(|| {
        let mut out = Output::create(&cli.out, &argv, &cli)?;
        commands::run(&cli, &mut out)?;
        out.finish()
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hairlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
