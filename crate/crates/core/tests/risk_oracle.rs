//! End-to-end risk figures on models with closed-form answers.

use cdg_risk::copula::CopulaSpec;
use cdg_risk::garch::{simulate_garch, GarchParams, Innovation};
use cdg_risk::mathcore::{norm_pdf, norm_quantile, CorrelationMatrix, RandomStream};
use cdg_risk::report::qq_points;
use cdg_risk::risk::{risk_report, FittedModel, Marginal, RiskOptions};

/// Lower-tail VaR and CVaR of N(0, sd^2) at level alpha.
fn normal_tail(sd: f64, alpha: f64) -> (f64, f64) {
    let z = norm_quantile(alpha);
    (sd * z, -sd * norm_pdf(z) / alpha)
}

#[test]
fn gaussian_copula_with_normal_marginals_matches_closed_form() {
    let rho = 0.5;
    let marginals = (0..3).map(|j| Marginal::gaussian(format!("A{j}"), 0.0, 1.0)).collect();
    let copula = CopulaSpec::gaussian(CorrelationMatrix::exchangeable(3, rho).unwrap());
    let model = FittedModel::new(marginals, copula).unwrap();
    let r = risk_report(&model, &RiskOptions { n_scenarios: 1_000_000, seed: 11, ..Default::default() }).unwrap();

    let (var, cvar) = normal_tail(1.0, 0.05);
    for a in &r.assets {
        assert!((a.risk.var - var).abs() < 0.01, "{} VaR {}", a.asset, a.risk.var);
        assert!((a.risk.cvar - cvar).abs() < 0.015, "{} CVaR {}", a.asset, a.risk.cvar);
    }
    // equal-weight portfolio of three unit normals with pairwise correlation rho
    let sd = ((1.0 + 2.0 * rho) / 3.0f64).sqrt();
    let (pvar, pcvar) = normal_tail(sd, 0.05);
    assert!((r.portfolio.risk.var - pvar).abs() < 0.01, "portfolio VaR {} vs {pvar}", r.portfolio.risk.var);
    assert!((r.portfolio.risk.cvar - pcvar).abs() < 0.015, "portfolio CVaR {} vs {pcvar}", r.portfolio.risk.cvar);

    // with positive dependence a bad portfolio day makes every asset worse
    for row in &r.covar.rows {
        assert!(row.delta_covar < -0.1, "{row:?}");
    }
}

#[test]
fn qq_points_of_correct_innovations_hug_the_diagonal() {
    let inn = Innovation::StudentT { nu: 6.0 };
    let params = GarchParams::new(1.0, 0.0, 0.0, 0.0, inn).unwrap();
    let sim = simulate_garch(&params, 100_000, &mut RandomStream::new(4, 1)).unwrap();
    let gap = qq_points(&sim.innovations, &inn).iter().map(|&(_, e, t)| (e - t).abs()).fold(0.0, f64::max);
    assert!(gap < 0.06, "max QQ gap {gap}");
    let wrong = qq_points(&sim.innovations, &Innovation::Gaussian);
    assert!(wrong.iter().map(|&(_, e, t)| (e - t).abs()).fold(0.0, f64::max) > gap);
}

fn unit_normal_model(d: usize, copula: CopulaSpec) -> FittedModel {
    let marginals = (0..d).map(|j| Marginal::gaussian(format!("A{j}"), 0.0, 1.0)).collect();
    FittedModel::new(marginals, copula).unwrap()
}

fn delta_of(r: &cdg_risk::risk::RiskReport, conditioning: usize, target: &str) -> f64 {
    r.stress[conditioning].rows.iter().find(|row| row.target == target).unwrap().delta_covar
}

#[test]
fn exchangeable_model_gives_symmetric_stress_tables() {
    let model = unit_normal_model(3, CopulaSpec::gaussian(CorrelationMatrix::exchangeable(3, 0.5).unwrap()));
    let r = risk_report(&model, &RiskOptions { n_scenarios: 1_000_000, seed: 5, ..Default::default() }).unwrap();
    // swapping the roles of two assets leaves the model unchanged
    assert!((delta_of(&r, 0, "A2") - delta_of(&r, 1, "A2")).abs() < 0.02);
    assert!((delta_of(&r, 0, "A1") - delta_of(&r, 1, "A0")).abs() < 0.02);
    assert!((r.stress[0].systemic_impact - r.stress[2].systemic_impact).abs() < 0.04);
}

#[test]
fn independence_delta_covar_shrinks_with_scenario_count() {
    let model = unit_normal_model(3, CopulaSpec::independence(3));
    let alpha: f64 = 0.05;
    // standard error of a conditional 5% normal quantile from n alpha draws
    let se_unit = (alpha * (1.0 - alpha)).sqrt() / norm_pdf(norm_quantile(alpha));
    for n in [10_000usize, 100_000, 1_000_000] {
        let r = risk_report(&model, &RiskOptions { n_scenarios: n, seed: 9, ..Default::default() }).unwrap();
        let worst = r.stress.iter().flat_map(|t| &t.rows).map(|row| row.delta_covar.abs()).fold(0.0, f64::max);
        let bound = 4.0 * se_unit / (n as f64 * alpha).sqrt();
        assert!(worst < bound, "N = {n}: max |ΔCoVaR| {worst} exceeds {bound}");
    }
}
