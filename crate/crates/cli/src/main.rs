//! Single entry point for the destination-prediction pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! tolerance failure. Log verbosity comes from `RUST_LOG`.

mod commands;

use clap::Parser;
use qdest::Error;

#[derive(Debug, Parser)]
#[command(
    name = "qdest",
    version,
    about = "Hybrid quantum-classical taxi destination prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape(_) | Error::Index(_) | Error::Contract(_) => 1,
        Error::Data(_) | Error::Io(_) | Error::Version(_) | Error::OutOfBounds(_) => 2,
        Error::Numeric(_) => 3,
    }
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap distinguishes help/version from genuine usage errors.
            if err.use_stderr() {
                let _ = err.print();
                std::process::exit(1);
            }
            let _ = err.print();
            std::process::exit(0);
        }
    };
    if let Err(err) = commands::run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
