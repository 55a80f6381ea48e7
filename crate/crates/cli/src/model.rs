//! The fitted-model file shared by the later pipeline steps.

use std::path::Path;

use cdg_risk::copula::{fit_copula_with, fit_pairwise, pseudo_observations, CopulaFit, Family, FitOptions, PairFit, PseudoObservations};
use cdg_risk::data::ReturnPanel;
use cdg_risk::dcc::{fit_dcc, DccFit, DccOptions};
use cdg_risk::garch::{fit_garch, GarchFit, GarchOptions};
use cdg_risk::gof::{aic, bic, Scope};
use cdg_risk::mathcore::Matrix;
use cdg_risk::risk::{FittedModel, MarginalKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// Bumped whenever the layout of [`ModelFile`] changes.
pub const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaEntry {
    pub family: Family,
    pub scope: Scope,
    pub n_params: usize,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub converged: bool,
    /// Panel fit; absent for pairwise scope or on failure.
    pub fit: Option<CopulaFit>,
    pub pairs: Vec<PairFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: u32,
    pub asset_ids: Vec<String>,
    pub n_obs: usize,
    pub garch: Vec<GarchFit>,
    pub dcc: DccFit,
    pub copulas: Vec<CopulaEntry>,
    /// Panel-scope family with the lowest AIC.
    pub selected: Option<Family>,
}

/// Result of fitting plus the convergence warnings raised on the way.
pub struct FitOutcome {
    pub model: ModelFile,
    pub warnings: Vec<String>,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(CliError::MissingInput(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let model: ModelFile =
            serde_json::from_str(&text).map_err(|e| CliError::Json { path: path.display().to_string(), source: e })?;
        if model.format != MODEL_FORMAT {
            return Err(CliError::Config(format!("model format {} is not supported (expected {MODEL_FORMAT})", model.format)));
        }
        Ok(model)
    }

    /// Standardized residuals, `T x n`.
    pub fn residuals(&self) -> Matrix {
        let t = self.n_obs;
        Matrix::from_fn(t, self.garch.len(), |i, j| self.garch[j].residuals[i])
    }

    pub fn pseudo_observations(&self) -> Result<PseudoObservations, CliError> {
        pseudo_observations(&self.residuals()).map_err(CliError::core)
    }

    pub fn entry(&self, family: Family) -> Option<&CopulaEntry> {
        self.copulas.iter().find(|c| c.family == family)
    }

    /// Joint model for simulation with the requested or selected copula.
    pub fn risk_model(&self, family: Option<Family>, kind: MarginalKind) -> Result<FittedModel, CliError> {
        let family = family
            .or(self.selected)
            .ok_or_else(|| CliError::Pipeline("no copula family was fitted over the whole panel".into()))?;
        let fit = self.entry(family).and_then(|e| e.fit.as_ref()).ok_or_else(|| {
            CliError::Pipeline(format!("{family} copula has no whole-panel fit in the model file"))
        })?;
        FittedModel::from_fits(&self.asset_ids, &self.garch, Some(&self.dcc), fit.spec.clone(), kind).map_err(CliError::core)
    }
}

fn fit_entry(pobs: &PseudoObservations, family: Family, opts: &FitOptions) -> CopulaEntry {
    let n = pobs.n_obs() as f64;
    let pairwise = family == Family::Gumbel && pobs.dim() > 2;
    let result = if pairwise {
        fit_pairwise(pobs, family, opts).map(|pairs| {
            let ll: f64 = pairs.iter().map(|p| p.fit.loglik).sum();
            let conv = pairs.iter().all(|p| p.fit.converged);
            (None, pairs, ll, conv)
        })
    } else {
        fit_copula_with(pobs, family, opts).map(|f| {
            let (ll, conv) = (f.loglik, f.converged);
            (Some(f), Vec::new(), ll, conv)
        })
    };
    let scope = if pairwise { Scope::Pairwise } else { Scope::Panel };
    let n_params = if pairwise { pobs.dim() * (pobs.dim() - 1) / 2 * family.n_params(2) } else { family.n_params(pobs.dim()) };
    match result {
        Ok((fit, pairs, ll, converged)) => CopulaEntry {
            family,
            scope,
            n_params,
            loglik: Some(ll),
            aic: Some(aic(ll, n_params)),
            bic: Some(bic(ll, n_params, n)),
            converged,
            fit,
            pairs,
            error: None,
        },
        Err(e) => CopulaEntry {
            family,
            scope,
            n_params,
            loglik: None,
            aic: None,
            bic: None,
            converged: false,
            fit: None,
            pairs: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Fits GARCH per asset, DCC on the residuals and every configured copula on
/// their pseudo-observations.
pub fn fit_model(panel: &ReturnPanel, cfg: &RunConfig) -> Result<FitOutcome, CliError> {
    let mut warnings = Vec::new();
    let garch_opts = GarchOptions { min_obs: cfg.min_obs, ..GarchOptions::default() };
    let garch = panel
        .columns()
        .par_iter()
        .map(|col| fit_garch(col, &garch_opts))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::core)?;
    for (id, g) in panel.asset_ids.iter().zip(&garch) {
        if !g.converged {
            warnings.push(format!("GARCH fit for {id} did not converge"));
        }
    }
    let z = Matrix::from_fn(panel.n_obs(), garch.len(), |i, j| garch[j].residuals[i]);
    let dcc = fit_dcc(&z, &DccOptions { min_obs: cfg.min_obs, ..DccOptions::default() }).map_err(CliError::core)?;
    if !dcc.converged {
        warnings.push("DCC fit did not converge".into());
    }
    let pobs = pseudo_observations(&z).map_err(CliError::core)?;
    let copula_opts = FitOptions { min_obs: cfg.min_obs, ..FitOptions::default() };
    let copulas: Vec<CopulaEntry> = cfg.families.iter().map(|&f| fit_entry(&pobs, f, &copula_opts)).collect();
    for c in &copulas {
        match &c.error {
            Some(e) => warnings.push(format!("{} copula fit failed: {e}", c.family)),
            None if !c.converged => warnings.push(format!("{} copula fit did not converge", c.family)),
            None => {}
        }
    }
    let selected = copulas
        .iter()
        .filter(|c| c.fit.is_some())
        .filter_map(|c| c.aic.map(|a| (c.family, a)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(f, _)| f);
    let model = ModelFile {
        format: MODEL_FORMAT,
        asset_ids: panel.asset_ids.clone(),
        n_obs: panel.n_obs(),
        garch,
        dcc,
        copulas,
        selected,
    };
    Ok(FitOutcome { model, warnings })
}
