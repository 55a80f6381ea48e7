//! Synthetic price files for end-to-end runs.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cdg_risk::dcc::{simulate_dcc, DccParams};
use cdg_risk::garch::{GarchParams, Innovation};
use cdg_risk::mathcore::{CorrelationMatrix, RandomStream};
use chrono::{Datelike, NaiveDate, Weekday};

pub const ASSETS: [&str; 6] = ["Chevron", "CocaCola", "Exxon", "Mastercard", "PepsiCo", "Visa"];

/// True DCC parameters of the fixture.
pub const FIXTURE_DCC: (f64, f64) = (0.05, 0.90);
/// True GARCH `(omega, alpha, beta)` of every fixture asset, in squared
/// daily-return units.
pub const FIXTURE_GARCH: (f64, f64, f64) = (2e-6, 0.08, 0.90);

pub fn business_days(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2018, 1, 2).unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    out
}

/// Writes one `date,close` file per asset with returns from a DCC-GARCH
/// model; `n_returns` returns means `n_returns + 1` prices.
pub fn write_fixture(dir: &Path, n_assets: usize, n_returns: usize, seed: u64) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let qbar = CorrelationMatrix::exchangeable(n_assets, 0.5).unwrap().matrix().clone();
    let dcc = DccParams::new(FIXTURE_DCC.0, FIXTURE_DCC.1, qbar).unwrap();
    let (w, a, b) = FIXTURE_GARCH;
    let marginals: Vec<GarchParams> =
        (0..n_assets).map(|_| GarchParams::new(w, a, b, 3e-4, Innovation::Gaussian).unwrap()).collect();
    let sim = simulate_dcc(&dcc, &marginals, n_returns, &mut RandomStream::new(seed, 17)).unwrap();
    let dates = business_days(n_returns + 1);
    (0..n_assets)
        .map(|j| {
            let path = dir.join(format!("{}.csv", ASSETS[j]));
            let mut text = String::from("date,close\n");
            let mut p = 100.0 * (j + 1) as f64;
            text.push_str(&format!("{},{p}\n", dates[0]));
            for t in 0..n_returns {
                p *= sim.returns[(t, j)].exp();
                text.push_str(&format!("{},{p}\n", dates[t + 1]));
            }
            std::fs::write(&path, text).unwrap();
            path
        })
        .collect()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cdg-risk")
}

/// Runs the binary with `args` and no inherited config variable.
pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("CDG_RISK_CONFIG").env("RUST_LOG", "warn").output().unwrap()
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "cdg-risk {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every non-manifest file in `dir` with its bytes, sorted by name.
pub fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with("manifest-"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
