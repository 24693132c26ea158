//! Structural verification of a configuration: inner-solver oracle
//! equivalence, kernel sanity, threshold structure of the solved policy and
//! the convexity/submodularity notes.
//!
//!     cargo run --example structure_checks [config.toml]

use std::path::Path;
use std::process::ExitCode;

use ehpolicy::experiments::run_verification;
use ehpolicy::SystemConfig;

fn main() -> ExitCode {
    let config = match std::env::args().nth(1) {
        Some(path) => match SystemConfig::load(Path::new(&path)) {
            Ok((config, warnings)) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                config
            }
            Err(err) => {
                eprintln!("error: {err}");
                return ExitCode::FAILURE;
            }
        },
        None => SystemConfig::default(),
    };
    match run_verification(&config) {
        Ok(report) => {
            print!("{report}");
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
