//! Command-line flags. Flags override the config file, which overrides the
//! built-in defaults.

use std::path::PathBuf;

use cdg_risk::copula::Family;
use cdg_risk::risk::MarginalKind;
use clap::Parser;

use crate::commands::Step;
use crate::config::{RunConfig, CONFIG_ENV};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cdg-risk", version, about = "Copula-DCC-GARCH tail-risk pipeline")]
pub struct Cli {
    #[arg(value_enum)]
    pub step: Step,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tail probability for VaR, CVaR and CoVaR.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte-Carlo scenario count.
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Comma-separated copula families, e.g. gaussian,student-t,clayton,gumbel.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<Family>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory of per-asset price CSV files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Marginal transform for simulation: empirical or student-t.
    #[arg(long, value_parser = parse_marginal)]
    pub marginal: Option<MarginalKind>,
    /// Minimum observations for an asset to be kept.
    #[arg(long)]
    pub min_obs: Option<usize>,
    /// Density grid resolution per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Exit with status 3 when a fit does not converge.
    #[arg(long)]
    pub strict: bool,
}

fn parse_marginal(s: &str) -> Result<MarginalKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown marginal transform {s:?}; expected empirical or student-t"))
}

impl Overrides {
    /// Resolves the effective configuration.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.scenarios {
            cfg.scenarios = v;
        }
        if let Some(v) = &self.families {
            cfg.families = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.data_dir {
            cfg.data_dir = v.clone();
        }
        if let Some(v) = self.marginal {
            cfg.marginal = v;
        }
        if let Some(v) = self.min_obs {
            cfg.min_obs = v;
        }
        if let Some(v) = self.grid {
            cfg.grid_resolution = v;
        }
        cfg.strict |= self.strict;
        Ok(cfg)
    }
}
