use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    cdg_risk_cli::run(&cdg_risk_cli::Cli::parse())
}
