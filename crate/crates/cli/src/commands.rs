//! Pipeline steps. Each reads its inputs from the output directory of the
//! previous step, writes its files, and returns what it wrote.

use std::path::{Path, PathBuf};

use cdg_risk::copula::{CopulaSpec, FitOptions};
use cdg_risk::data::{align_panel, load_price_series, log_returns, summarize, ReturnPanel};
use cdg_risk::garch::Innovation;
use cdg_risk::gof::{compare_families, CompareOptions, GofReport};
use cdg_risk::report;
use cdg_risk::risk::{risk_report, CovarConditioning, RiskOptions, RiskReport};

use crate::config::{Conditioning, RunConfig};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::model::{fit_model, ModelFile};
use crate::outputs as names;

/// Pipeline verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Step {
    Preprocess,
    Fit,
    Compare,
    Risk,
    Stress,
    Plotdata,
    All,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Preprocess => "preprocess",
            Step::Fit => "fit",
            Step::Compare => "compare",
            Step::Risk => "risk",
            Step::Stress => "stress",
            Step::Plotdata => "plotdata",
            Step::All => "all",
        }
    }
}

/// Files read and written by a step, and non-fatal convergence warnings.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Json { path: dir.join(name).display().to_string(), source: e })?;
        text.push('\n');
        self.write(dir, name, text.as_bytes())
    }

    fn merge(&mut self, other: Outcome) {
        for p in other.inputs {
            if !self.inputs.contains(&p) && !self.written.contains(&p) {
                self.inputs.push(p);
            }
        }
        self.written.extend(other.written);
        self.warnings.extend(other.warnings);
    }
}

fn report_err(e: report::ReportError) -> CliError {
    CliError::core(e)
}

fn ensure_out(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))
}

fn load_model(cfg: &RunConfig, outcome: &mut Outcome) -> Result<ModelFile, CliError> {
    let path = cfg.model_path();
    let model = ModelFile::load(&path)?;
    outcome.inputs.push(path);
    Ok(model)
}

/// Loads the price files, aligns their log returns, and writes the panel with
/// its summary and correlation tables.
pub fn preprocess(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let files = cfg.input_files()?;
    let mut series = Vec::with_capacity(files.len());
    for path in &files {
        let loaded = load_price_series(path).map_err(|e| CliError::Pipeline(format!("{}: {e}", path.display())))?;
        outcome.inputs.push(path.clone());
        match log_returns(&loaded.series) {
            Ok(r) => series.push(r),
            Err(e) => log::warn!("excluding {}: {e}", loaded.series.asset_id),
        }
    }
    let aligned = align_panel(&series, cfg.min_obs).map_err(CliError::core)?;
    for id in &aligned.dropped {
        log::warn!("excluded asset {id}: fewer than {} usable observations", cfg.min_obs);
    }
    let panel = aligned.panel;
    log::info!("panel: {} dates x {} assets", panel.n_obs(), panel.n_assets());

    let mut buf = Vec::new();
    panel.write_csv(&mut buf).map_err(CliError::core)?;
    outcome.write(&cfg.out, names::PANEL, &buf)?;
    let stats = summarize(&panel).map_err(CliError::core)?;
    outcome.write(&cfg.out, names::TABLE1, report::table1_summary(&stats).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::TABLE2, report::table2_correlation(&stats).map_err(report_err)?.as_bytes())?;
    Ok(outcome)
}

/// Fits the marginal, correlation and copula models and writes the model file.
pub fn fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let path = cfg.panel_path();
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    let panel = ReturnPanel::load(&path).map_err(CliError::core)?;
    outcome.inputs.push(path);
    let fitted = fit_model(&panel, cfg)?;
    outcome.warnings = fitted.warnings;
    outcome.write_json(&cfg.out, names::MODEL, &fitted.model)?;
    Ok(outcome)
}

/// Compares the configured copula families on the model's residuals.
pub fn compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let model = load_model(cfg, &mut outcome)?;
    let pobs = model.pseudo_observations()?;
    let opts = CompareOptions {
        rank_by: cfg.rank_by,
        energy: true,
        model_draws: cfg.energy_draws,
        seed: cfg.seed,
        pairwise: false,
        fit: FitOptions { min_obs: cfg.min_obs, ..FitOptions::default() },
    };
    let gof: GofReport = compare_families(&pobs, &cfg.families, &opts);
    for row in &gof.rows {
        match (&row.metrics, &row.error) {
            (_, Some(e)) => outcome.warnings.push(format!("{} copula comparison failed: {e}", row.family)),
            (Some(m), None) if !m.converged => outcome.warnings.push(format!("{} copula fit did not converge", row.family)),
            _ => {}
        }
    }
    let ids = &model.asset_ids;
    outcome.write(&cfg.out, names::TABLE5, report::table5_families(&gof, ids).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::TABLE8, report::table8_criteria(&gof).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::GOF_DETAIL, report::gof_detail(&gof).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::GOF_PAIRS, report::gof_pairs(&gof, ids).map_err(report_err)?.as_bytes())?;
    outcome.write_json(&cfg.out, names::GOF_JSON, &gof)?;
    Ok(outcome)
}

fn simulate_risk(cfg: &RunConfig, outcome: &mut Outcome) -> Result<RiskReport, CliError> {
    let model = load_model(cfg, outcome)?;
    let joint = model.risk_model(cfg.risk_family, cfg.marginal)?;
    let conditioning = match &cfg.conditioning {
        Conditioning::Portfolio => CovarConditioning::Portfolio,
        Conditioning::Asset(name) => CovarConditioning::Asset(
            model
                .asset_ids
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| CliError::Config(format!("conditioning asset {name:?} is not in the model")))?,
        ),
    };
    let opts = RiskOptions {
        alpha: cfg.alpha,
        n_scenarios: cfg.scenarios,
        seed: cfg.seed,
        weights: cfg.weights.clone(),
        conditioning,
    };
    log::info!("simulating {} scenarios from the {} copula", cfg.scenarios, joint.copula.family());
    let report = risk_report(&joint, &opts).map_err(CliError::core)?;
    report.covar.check_identity().map_err(CliError::core)?;
    for t in &report.stress {
        t.check_identity().map_err(CliError::core)?;
    }
    Ok(report)
}

fn write_risk(cfg: &RunConfig, r: &RiskReport, outcome: &mut Outcome) -> Result<(), CliError> {
    outcome.write(&cfg.out, names::TABLE3, report::table3_var(r).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::TABLE4, report::table4_covar(&r.covar).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::TABLE7, report::table7_portfolio(r).map_err(report_err)?.as_bytes())?;
    outcome.write_json(&cfg.out, names::RISK_JSON, r)
}

fn write_stress(cfg: &RunConfig, r: &RiskReport, outcome: &mut Outcome) -> Result<(), CliError> {
    outcome.write(&cfg.out, names::TABLE6, report::table6_stress(r).map_err(report_err)?.as_bytes())?;
    outcome.write(&cfg.out, names::STRESS_DETAIL, report::stress_detail(r).map_err(report_err)?.as_bytes())?;
    outcome.write_json(&cfg.out, names::STRESS_JSON, &r.stress)
}

/// VaR, CVaR, CoVaR and portfolio tables.
pub fn risk(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let r = simulate_risk(cfg, &mut outcome)?;
    write_risk(cfg, &r, &mut outcome)?;
    Ok(outcome)
}

/// Stress tables conditioning on each asset in turn.
pub fn stress(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let r = simulate_risk(cfg, &mut outcome)?;
    write_stress(cfg, &r, &mut outcome)?;
    Ok(outcome)
}

/// Bivariate density of a fitted family on the first asset pair.
fn plot_spec(entry: &crate::model::CopulaEntry) -> Option<CopulaSpec> {
    match (&entry.fit, entry.pairs.first()) {
        (Some(f), _) => Some(if f.spec.dim() > 2 { f.spec.pair(0, 1) } else { f.spec.clone() }),
        (None, Some(p)) => Some(p.fit.spec.clone()),
        (None, None) => None,
    }
}

/// Density grids, QQ data and histograms.
pub fn plotdata(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_out(cfg)?;
    let mut outcome = Outcome::default();
    let model = load_model(cfg, &mut outcome)?;
    let specs: Vec<CopulaSpec> = model.copulas.iter().filter_map(plot_spec).collect();
    let grid = report::density_grid_csv(&specs, cfg.grid_resolution).map_err(report_err)?;
    outcome.write(&cfg.out, names::DENSITY_GRID, grid.as_bytes())?;
    let series: Vec<(String, Vec<f64>, Innovation)> = model
        .asset_ids
        .iter()
        .zip(&model.garch)
        .map(|(id, g)| (id.clone(), g.residuals.clone(), g.params.innovation))
        .collect();
    outcome.write(&cfg.out, names::QQ, report::qq_csv(&series).map_err(report_err)?.as_bytes())?;
    let hist = report::histogram_csv(&series, cfg.histogram_bins).map_err(report_err)?;
    outcome.write(&cfg.out, names::HISTOGRAM, hist.as_bytes())?;
    Ok(outcome)
}

/// Every step in order; risk and stress share one simulation.
pub fn all(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut outcome = preprocess(cfg)?;
    outcome.merge(fit(cfg)?);
    outcome.merge(compare(cfg)?);
    let mut risk_outcome = Outcome::default();
    let r = simulate_risk(cfg, &mut risk_outcome)?;
    write_risk(cfg, &r, &mut risk_outcome)?;
    write_stress(cfg, &r, &mut risk_outcome)?;
    outcome.merge(risk_outcome);
    outcome.merge(plotdata(cfg)?);
    Ok(outcome)
}

/// Runs one step and writes its manifest.
pub fn run_step(step: Step, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let started = chrono::Utc::now();
    let mut outcome = match step {
        Step::Preprocess => preprocess(cfg),
        Step::Fit => fit(cfg),
        Step::Compare => compare(cfg),
        Step::Risk => risk(cfg),
        Step::Stress => stress(cfg),
        Step::Plotdata => plotdata(cfg),
        Step::All => all(cfg),
    }?;
    let manifest =
        RunManifest::build(step.name(), cfg, started, &outcome.inputs, &outcome.written, &outcome.warnings)?;
    let name = RunManifest::file_name(step.name());
    outcome.write_json(&cfg.out, &name, &manifest)?;
    Ok(outcome)
}
