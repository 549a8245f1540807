use std::process::ExitCode;

use clap::Parser;
use prs_lab::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertions failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
