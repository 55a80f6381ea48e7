//! File names written under the output directory.

pub const PANEL: &str = "panel.csv";
pub const TABLE1: &str = "table1_summary.csv";
pub const TABLE2: &str = "table2_correlation.csv";
pub const MODEL: &str = "model.json";
pub const TABLE3: &str = "table3_var_cvar.csv";
pub const TABLE4: &str = "table4_covar.csv";
pub const TABLE5: &str = "table5_copula_families.csv";
pub const TABLE6: &str = "table6_stress.csv";
pub const TABLE7: &str = "table7_portfolio.csv";
pub const TABLE8: &str = "table8_goodness_of_fit.csv";
pub const GOF_DETAIL: &str = "gof_detail.csv";
pub const GOF_PAIRS: &str = "gof_pairs.csv";
pub const GOF_JSON: &str = "gof.json";
pub const RISK_JSON: &str = "risk.json";
pub const STRESS_DETAIL: &str = "stress_detail.csv";
pub const STRESS_JSON: &str = "stress.json";
pub const DENSITY_GRID: &str = "plot_density_grid.csv";
pub const QQ: &str = "plot_qq.csv";
pub const HISTOGRAM: &str = "plot_histogram.csv";
