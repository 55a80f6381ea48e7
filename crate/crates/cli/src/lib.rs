//! Command-line pipeline: preprocess, fit, compare, risk, stress and
//! plotdata steps over a directory of price files, driven by a JSON config
//! and writing CSV/JSON reports plus a digest manifest per step.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod model;
pub mod outputs;

use std::process::ExitCode;

pub use args::Cli;
pub use commands::{run_step, Outcome, Step};
pub use config::RunConfig;
pub use error::CliError;

/// Every requested output was written and every check passed.
pub const EXIT_OK: u8 = 0;
/// The step failed; nothing is guaranteed to have been written.
pub const EXIT_FAILURE: u8 = 1;
/// Outputs were written but a fit did not converge under `strict`.
pub const EXIT_NOT_CONVERGED: u8 = 3;

fn set_workers(workers: usize) {
    if workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            log::debug!("worker pool already configured: {e}");
        }
    }
}

/// Runs a parsed command line and maps the result to an exit status.
pub fn run(cli: &Cli) -> ExitCode {
    let cfg = match cli.overrides.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    set_workers(cfg.workers);
    match run_step(cli.step, &cfg) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: wrote {} file(s) to {}", cli.step.name(), outcome.written.len(), cfg.out.display());
            if cfg.strict && !outcome.warnings.is_empty() {
                eprintln!("error: {} convergence warning(s) under strict mode", outcome.warnings.len());
                ExitCode::from(EXIT_NOT_CONVERGED)
            } else {
                ExitCode::from(EXIT_OK)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
