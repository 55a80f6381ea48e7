//! CSV renderings of the summary, goodness-of-fit and risk tables, plus
//! plot-ready data (density grids, QQ pairs, histograms).
//!
//! Numbers are written with six decimals and undefined values as `NA`.

use std::fmt::Display;

use thiserror::Error;

use crate::copula::{density_grid, CopulaError, CopulaSpec};
use crate::data::SummaryStats;
use crate::garch::Innovation;
use crate::gof::{GofReport, PairMetrics};
use crate::risk::{AssetRisk, CovarTable, RiskReport};

pub const NA: &str = "NA";

pub const TABLE1_HEADER: [&str; 4] = ["Asset", "Mean", "Std. Dev", "Min/Max"];
pub const TABLE4_HEADER: [&str; 4] = ["Asset", "VaR", "CoVaR", "ΔCoVaR"];
pub const TABLE5_HEADER: [&str; 8] = [
    "Copula Family",
    "Energy Score",
    "Lower Tail",
    "Upper Tail",
    "Pearson Corr",
    "Spearman Corr",
    "Kendall's Tau",
    "Asset Pair Examples",
];
pub const TABLE6_HEADER: [&str; 2] = ["Conditioning Asset", "Systemic Impact (ΣΔCoVaR)"];
pub const TABLE8_HEADER: [&str; 4] = ["Copula Family", "AIC", "BIC", "Energy Score"];
pub const SYSTEMIC_IMPACT_LABEL: &str = "Systemic Impact";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
}

/// Six-decimal rendering; negative zero prints as zero, non-finite as `NA`.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return NA.to_string();
    }
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn fmt6_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt6)
}

/// `x` rounded to the printed precision.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn render<S: AsRef<[u8]>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Inconsistent(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Inconsistent(e.to_string()))
}

fn alpha_label(alpha: f64) -> impl Display {
    // shortest round-trip form, e.g. 0.05
    alpha
}

/// Table 1: per-asset descriptive statistics.
pub fn table1_summary(stats: &SummaryStats) -> Result<String, ReportError> {
    render(
        &TABLE1_HEADER,
        stats.assets.iter().map(|a| {
            vec![a.asset_id.clone(), fmt6(a.mean), fmt6(a.std_dev), format!("({}, {})", fmt6(a.min), fmt6(a.max))]
        }),
    )
}

/// Table 2: correlation matrix with asset names as row and column labels.
pub fn table2_correlation(stats: &SummaryStats) -> Result<String, ReportError> {
    let mut header = vec!["Asset".to_string()];
    header.extend(stats.assets.iter().map(|a| a.asset_id.clone()));
    render(
        &header,
        stats.assets.iter().zip(&stats.correlation).map(|(a, row)| {
            let mut r = vec![a.asset_id.clone()];
            r.extend(row.iter().map(|v| fmt6_opt(*v)));
            r
        }),
    )
}

/// Table 3: per-asset VaR and CVaR.
pub fn table3_var(report: &RiskReport) -> Result<String, ReportError> {
    let a = alpha_label(report.alpha);
    let header = ["Asset".to_string(), format!("VaR (α = {a})"), format!("CVaR (α = {a})")];
    render(&header, report.assets.iter().map(|r| vec![r.asset.clone(), fmt6(r.risk.var), fmt6(r.risk.cvar)]))
}

/// Target, VaR, CoVaR and ΔCoVaR as they appear in print.
pub type PrintedRow = (String, f64, f64, f64);

/// Printed CoVaR rows `(target, VaR, CoVaR, ΔCoVaR)` and their footer sum.
/// The printed ΔCoVaR is the difference of the printed CoVaR and VaR, so the
/// identity holds on the page; the footer is the sum of printed ΔCoVaR.
pub fn printed_covar(table: &CovarTable) -> Result<(Vec<PrintedRow>, f64), ReportError> {
    table.check_identity().map_err(|e| ReportError::Inconsistent(e.to_string()))?;
    let rows: Vec<(String, f64, f64, f64)> = table
        .rows
        .iter()
        .map(|r| {
            let (v, c) = (round6(r.var), round6(r.covar));
            (r.target.clone(), v, c, round6(c - v))
        })
        .collect();
    let impact = round6(rows.iter().map(|p| p.3).sum());
    Ok((rows, impact))
}

/// Table 4: CoVaR rows plus the systemic-impact footer.
pub fn table4_covar(table: &CovarTable) -> Result<String, ReportError> {
    let (printed, impact) = printed_covar(table)?;
    let mut rows: Vec<Vec<String>> =
        printed.iter().map(|(name, v, c, d)| vec![name.clone(), fmt6(*v), fmt6(*c), fmt6(*d)]).collect();
    rows.push(vec![SYSTEMIC_IMPACT_LABEL.to_string(), String::new(), String::new(), fmt6(impact)]);
    render(&TABLE4_HEADER, rows)
}

/// Pair label such as `Visa–Mastercard`.
pub fn pair_label(names: &[String], i: usize, j: usize) -> String {
    let get = |k: usize| names.get(k).cloned().unwrap_or_else(|| format!("asset {k}"));
    format!("{}\u{2013}{}", get(i), get(j))
}

/// Number of pairs quoted in the Table 5 example column.
pub const PAIR_EXAMPLES: usize = 2;

/// Pairs with the strongest fitted tail dependence, ties broken by the model
/// Kendall's tau.
fn pair_examples(pairs: &[PairMetrics], names: &[String]) -> String {
    let key = |p: &PairMetrics| (p.lower_tail + p.upper_tail, p.correlations.kendall.unwrap_or(-2.0));
    let mut ranked: Vec<&PairMetrics> = pairs.iter().collect();
    ranked.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb.0.total_cmp(&ka.0).then(kb.1.total_cmp(&ka.1)).then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    if ranked.is_empty() {
        return NA.to_string();
    }
    ranked.iter().take(PAIR_EXAMPLES).map(|p| pair_label(names, p.i, p.j)).collect::<Vec<_>>().join(", ")
}

/// Table 5: family comparison with tail and correlation columns.
pub fn table5_families(report: &GofReport, names: &[String]) -> Result<String, ReportError> {
    let rows = report.rows.iter().map(|row| match &row.metrics {
        Some(m) => vec![
            row.family.label().to_string(),
            fmt6_opt(m.energy),
            fmt6(m.lower_tail),
            fmt6(m.upper_tail),
            fmt6_opt(m.correlations.pearson),
            fmt6_opt(m.correlations.spearman),
            fmt6_opt(m.correlations.kendall),
            pair_examples(&m.pairs, names),
        ],
        None => {
            let mut r = vec![row.family.label().to_string()];
            r.extend(std::iter::repeat_n(NA.to_string(), 7));
            r
        }
    });
    render(&TABLE5_HEADER, rows)
}

/// Table 6: systemic impact per conditioning asset, summed as printed.
pub fn table6_stress(report: &RiskReport) -> Result<String, ReportError> {
    let rows = report
        .stress
        .iter()
        .map(|t| Ok(vec![t.conditioning.clone(), fmt6(printed_covar(t)?.1)]))
        .collect::<Result<Vec<_>, ReportError>>()?;
    render(&TABLE6_HEADER, rows)
}

/// Full stress rows for every conditioning asset.
pub fn stress_detail(report: &RiskReport) -> Result<String, ReportError> {
    let header = ["Conditioning Asset", "Asset", "VaR", "CoVaR", "ΔCoVaR"];
    let mut rows = Vec::new();
    for t in &report.stress {
        for (name, v, c, d) in printed_covar(t)?.0 {
            rows.push(vec![t.conditioning.clone(), name, fmt6(v), fmt6(c), fmt6(d)]);
        }
    }
    render(&header, rows)
}

/// Table 7: the portfolio first, then each asset.
pub fn table7_portfolio(report: &RiskReport) -> Result<String, ReportError> {
    let a = alpha_label(report.alpha);
    let header = ["Asset/Portfolio".to_string(), format!("VaR (α={a})"), format!("CVaR (α={a})")];
    let all: Vec<&AssetRisk> = std::iter::once(&report.portfolio).chain(&report.assets).collect();
    render(&header, all.into_iter().map(|r| vec![r.asset.clone(), fmt6(r.risk.var), fmt6(r.risk.cvar)]))
}

/// Table 8: information criteria and energy score per family.
pub fn table8_criteria(report: &GofReport) -> Result<String, ReportError> {
    render(
        &TABLE8_HEADER,
        report.rows.iter().map(|row| match &row.metrics {
            Some(m) => vec![row.family.label().to_string(), fmt6(m.aic), fmt6(m.bic), fmt6_opt(m.energy)],
            None => vec![row.family.label().to_string(), NA.into(), NA.into(), NA.into()],
        }),
    )
}

/// Every comparison metric per family, including scope and status.
pub fn gof_detail(report: &GofReport) -> Result<String, ReportError> {
    let header = ["Copula Family", "Scope", "Parameters", "LogLik", "AIC", "BIC", "Energy Score", "Converged", "Status"];
    render(
        &header,
        report.rows.iter().map(|row| match &row.metrics {
            Some(m) => vec![
                row.family.label().to_string(),
                format!("{:?}", m.scope).to_lowercase(),
                m.n_params.to_string(),
                fmt6(m.loglik),
                fmt6(m.aic),
                fmt6(m.bic),
                fmt6_opt(m.energy),
                m.converged.to_string(),
                "ok".to_string(),
            ],
            None => {
                let mut r = vec![row.family.label().to_string()];
                r.extend(std::iter::repeat_n(NA.to_string(), 7));
                r.push(row.error.clone().unwrap_or_default());
                r
            }
        }),
    )
}

/// Per-pair tail and correlation metrics for each family and for the data.
pub fn gof_pairs(report: &GofReport, names: &[String]) -> Result<String, ReportError> {
    let header = ["Source", "Pair", "Lower Tail", "Upper Tail", "Pearson Corr", "Spearman Corr", "Kendall's Tau"];
    let mut rows = Vec::new();
    for p in &report.empirical {
        rows.push(vec![
            "Empirical".to_string(),
            pair_label(names, p.i, p.j),
            NA.to_string(),
            NA.to_string(),
            fmt6_opt(p.correlations.pearson),
            fmt6_opt(p.correlations.spearman),
            fmt6_opt(p.correlations.kendall),
        ]);
    }
    for row in &report.rows {
        for p in row.metrics.iter().flat_map(|m| &m.pairs) {
            rows.push(vec![
                row.family.label().to_string(),
                pair_label(names, p.i, p.j),
                fmt6(p.lower_tail),
                fmt6(p.upper_tail),
                fmt6_opt(p.correlations.pearson),
                fmt6_opt(p.correlations.spearman),
                fmt6_opt(p.correlations.kendall),
            ]);
        }
    }
    render(&header, rows)
}

/// Bivariate density on a grid of cell midpoints: `family,u,v,density`.
pub fn density_grid_csv(specs: &[CopulaSpec], resolution: usize) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for spec in specs {
        for (u, v, c) in density_grid(spec, resolution)? {
            rows.push(vec![spec.family().label().to_string(), fmt6(u), fmt6(v), fmt6(c)]);
        }
    }
    render(&["family", "u", "v", "density"], rows)
}

/// Central probability range of the QQ data; the extreme order statistics of
/// heavy-tailed residuals are too noisy to compare.
pub const QQ_RANGE: (f64, f64) = (0.01, 0.99);

/// Sorted residuals against fitted quantiles at `i / (k + 1)`, restricted to
/// [`QQ_RANGE`].
pub fn qq_points(residuals: &[f64], innovation: &Innovation) -> Vec<(f64, f64, f64)> {
    let mut z = residuals.to_vec();
    z.sort_by(f64::total_cmp);
    let k = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &e)| ((i + 1) as f64 / (k + 1.0), e))
        .filter(|(p, _)| *p >= QQ_RANGE.0 && *p <= QQ_RANGE.1)
        .map(|(p, e)| (p, e, innovation.quantile(p)))
        .collect()
}

/// `asset,probability,empirical,theoretical`.
pub fn qq_csv(series: &[(String, Vec<f64>, Innovation)]) -> Result<String, ReportError> {
    let rows = series.iter().flat_map(|(name, res, inn)| {
        qq_points(res, inn).into_iter().map(move |(p, e, t)| vec![name.clone(), fmt6(p), fmt6(e), fmt6(t)])
    });
    render(&["asset", "probability", "empirical", "theoretical"], rows)
}

/// Histogram density of `x` in `bins` equal-width bins with the fitted
/// innovation density at each bin centre:
/// `(left, right, empirical density, fitted density)`.
pub fn histogram(x: &[f64], bins: usize, innovation: &Innovation) -> Vec<(f64, f64, f64, f64)> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() || bins == 0 || !(hi > lo) {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in x {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let left = lo + b as f64 * width;
            let right = left + width;
            (left, right, c as f64 / (n * width), innovation.ln_pdf(0.5 * (left + right)).exp())
        })
        .collect()
}

/// `asset,bin_left,bin_right,density,fitted_density`.
pub fn histogram_csv(series: &[(String, Vec<f64>, Innovation)], bins: usize) -> Result<String, ReportError> {
    let rows = series.iter().flat_map(|(name, res, inn)| {
        histogram(res, bins, inn)
            .into_iter()
            .map(move |(l, r, d, f)| vec![name.clone(), fmt6(l), fmt6(r), fmt6(d), fmt6(f)])
    });
    render(&["asset", "bin_left", "bin_right", "density", "fitted_density"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::CovarRow;

    fn row(name: &str, var: f64, covar: f64) -> CovarRow {
        CovarRow { target: name.into(), conditioning: "P".into(), var, covar, delta_covar: covar - var, stress_count: 1 }
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt6(-0.639), "-0.639000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(f64::NAN), "NA");
        assert_eq!(fmt6_opt(None), "NA");
    }

    #[test]
    fn table4_prints_consistent_identity() {
        let t = CovarTable::new("P".into(), vec![row("Chevron", -0.64063, -0.65394), row("Visa", -0.30525, -0.09781)]).unwrap();
        let csv = table4_covar(&t).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Asset,VaR,CoVaR,ΔCoVaR");
        assert_eq!(lines[1], "Chevron,-0.640630,-0.653940,-0.013310");
        assert_eq!(lines[2], "Visa,-0.305250,-0.097810,0.207440");
        assert_eq!(lines[3], "Systemic Impact,,,0.194130");
    }

    #[test]
    fn qq_restricted_to_central_range() {
        let res: Vec<f64> = (0..999).map(|i| i as f64).collect();
        let pts = qq_points(&res, &Innovation::Gaussian);
        assert!(pts.iter().all(|p| p.0 >= 0.01 && p.0 <= 0.99));
        assert_eq!(pts.len(), 981);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.618).fract()).collect();
        let h = histogram(&x, 20, &Innovation::Gaussian);
        let mass: f64 = h.iter().map(|(l, r, d, _)| (r - l) * d).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rows() {
        let csv = density_grid_csv(&[CopulaSpec::independence(2)], 50).unwrap();
        assert_eq!(csv.lines().count(), 2501);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",1.000000")));
    }
}
