//! Run configuration: defaults, JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use cdg_risk::copula::Family;
use cdg_risk::gof::RankKey;
use cdg_risk::risk::{validate_weights, MarginalKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable holding the default config path.
pub const CONFIG_ENV: &str = "CDG_RISK_CONFIG";

/// Smallest scenario count accepted by the CLI.
pub const MIN_CLI_SCENARIOS: usize = 10_000;

/// Target of the headline CoVaR table.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    #[default]
    Portfolio,
    /// Condition on the named asset.
    Asset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    /// Price files relative to `data_dir`; every `*.csv` there when empty.
    pub files: Vec<PathBuf>,
    pub alpha: f64,
    pub families: Vec<Family>,
    pub scenarios: usize,
    pub seed: u64,
    pub weights: Option<Vec<f64>>,
    pub out: PathBuf,
    pub marginal: MarginalKind,
    pub min_obs: usize,
    /// Treat non-converged fits as failures.
    pub strict: bool,
    /// Worker threads; 0 lets the runtime decide. Results do not depend on it.
    pub workers: usize,
    pub rank_by: RankKey,
    /// Copula used for simulation; the best fitted family by AIC when absent.
    pub risk_family: Option<Family>,
    pub conditioning: Conditioning,
    /// Model draws per family for the energy score.
    pub energy_draws: usize,
    pub grid_resolution: usize,
    pub histogram_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            files: Vec::new(),
            alpha: 0.05,
            families: Family::ALL.to_vec(),
            scenarios: 1_000_000,
            seed: 0,
            weights: None,
            out: PathBuf::from("out"),
            marginal: MarginalKind::Empirical,
            min_obs: 50,
            strict: false,
            workers: 0,
            rank_by: RankKey::Aic,
            risk_family: None,
            conditioning: Conditioning::Portfolio,
            energy_draws: 5000,
            grid_resolution: 50,
            histogram_bins: 40,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha must lie in (0, 0.5), got {}", self.alpha));
        }
        if self.scenarios < MIN_CLI_SCENARIOS {
            return bad(format!("scenarios must be at least {MIN_CLI_SCENARIOS}, got {}", self.scenarios));
        }
        if self.families.is_empty() {
            return bad("at least one copula family is required".into());
        }
        if self.min_obs < 2 {
            return bad("min_obs must be at least 2".into());
        }
        if self.energy_draws == 0 || self.grid_resolution == 0 || self.histogram_bins == 0 {
            return bad("energy_draws, grid_resolution and histogram_bins must be positive".into());
        }
        if let Some(w) = &self.weights {
            validate_weights(w, w.len()).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Input price files in a stable order.
    pub fn input_files(&self) -> Result<Vec<PathBuf>, CliError> {
        if !self.files.is_empty() {
            return Ok(self.files.iter().map(|f| self.data_dir.join(f)).collect());
        }
        let entries = std::fs::read_dir(&self.data_dir).map_err(|e| CliError::io(&self.data_dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(&self.data_dir, e))?.path();
            if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }

    pub fn panel_path(&self) -> PathBuf {
        self.out.join(crate::outputs::PANEL)
    }

    pub fn model_path(&self) -> PathBuf {
        self.out.join(crate::outputs::MODEL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"alpha": 0.01, "families": ["clayton", "student-t"]}"#).unwrap();
        assert_eq!(c.alpha, 0.01);
        assert_eq!(c.families, vec![Family::Clayton, Family::StudentT]);
        assert_eq!(c.scenarios, 1_000_000);
        assert_eq!(c.min_obs, 50);
    }

    #[test]
    fn rejects_bad_values() {
        for json in [
            r#"{"alpha": 0.5}"#,
            r#"{"alpha": 0}"#,
            r#"{"scenarios": 9999}"#,
            r#"{"weights": [0.5, 0.6]}"#,
            r#"{"families": []}"#,
        ] {
            let c: RunConfig = serde_json::from_str(json).unwrap();
            assert!(c.validate().is_err(), "{json}");
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn conditioning_round_trip() {
        let c: RunConfig = serde_json::from_str(r#"{"conditioning": {"asset": "Visa"}}"#).unwrap();
        assert_eq!(c.conditioning, Conditioning::Asset("Visa".into()));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
