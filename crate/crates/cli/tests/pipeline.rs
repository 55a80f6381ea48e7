mod common;

use cdg_risk::copula::{CopulaSpec, Family};
use cdg_risk_cli::manifest::{sha256_file, RunManifest};
use cdg_risk_cli::model::ModelFile;
use cdg_risk_cli::outputs as names;
use common::*;

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn preprocess_aligns_excludes_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_fixture(&data, 6, 300, 1);
    // too short to survive the 50-observation filter
    let mut short = String::from("date,close\n");
    for (t, d) in business_days(20).iter().enumerate() {
        short.push_str(&format!("{d},{}\n", 50.0 + t as f64));
    }
    std::fs::write(data.join("Tiny.csv"), short).unwrap();

    let out = tmp.path().join("out");
    let args = ["preprocess", "--data-dir", path_str(&data), "--out", path_str(&out)];
    let first = run_ok(&args);
    assert!(String::from_utf8_lossy(&first.stderr).contains("Tiny"), "exclusion not logged");

    let files = report_files(&out);
    let names_written: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names_written, [names::PANEL, names::TABLE1, names::TABLE2]);
    let (header, rows) = read_csv(&out.join(names::PANEL));
    assert_eq!(rows.len(), 300);
    assert_eq!(header.len(), 7);
    assert!(!header.iter().any(|h| h == "Tiny"));

    let (_, t1) = read_csv(&out.join(names::TABLE1));
    assert_eq!(t1.len(), 6);
    let (_, t2) = read_csv(&out.join(names::TABLE2));
    for (i, row) in t2.iter().enumerate() {
        assert_eq!(row[i + 1], "1.000000");
    }

    run_ok(&args);
    assert_eq!(report_files(&out), files);

    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(out.join(RunManifest::file_name("preprocess"))).unwrap()).unwrap();
    assert_eq!(manifest.inputs.len(), 7);
    for (path, digest) in &manifest.outputs {
        assert_eq!(&sha256_file(std::path::Path::new(path)).unwrap(), digest);
    }
}

#[test]
fn too_few_assets_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_fixture(&data, 1, 100, 2);
    let out = run(&["preprocess", "--data-dir", path_str(&data), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
}

#[test]
fn missing_panel_names_expected_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("empty");
    let out = run(&["fit", "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(path_str(&out_dir.join(names::PANEL))), "{err}");
}

#[test]
fn missing_model_is_a_clean_error() {
    let tmp = tempfile::tempdir().unwrap();
    for step in ["compare", "risk", "stress", "plotdata"] {
        let out = run(&[step, "--out", path_str(tmp.path())]);
        assert_eq!(out.status.code(), Some(1), "{step}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(names::MODEL));
    }
}

#[test]
fn invalid_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["preprocess", "--alpha", "0.7", "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    let out = run(&["preprocess", "--scenarios", "500", "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_fixture(&data, 2, 120, 3);
    let out = tmp.path().join("from-env");
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, serde_json::json!({ "data_dir": data, "out": out }).to_string()).unwrap();
    let status = std::process::Command::new(bin())
        .arg("preprocess")
        .env("CDG_RISK_CONFIG", &cfg)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(out.join(names::PANEL).exists());
}

/// Simulate-then-recover through the whole command line.
#[test]
fn end_to_end_recovers_fixture_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_fixture(&data, 3, 4000, 11);
    let out = tmp.path().join("out");
    let o = path_str(&out);
    let common = ["--data-dir", path_str(&data), "--out", o, "--seed", "5", "--scenarios", "20000"];
    for step in ["preprocess", "fit", "compare", "risk", "stress"] {
        let mut args = vec![step];
        args.extend(common);
        run_ok(&args);
    }
    let mut args = vec!["plotdata", "--grid", "50"];
    args.extend(common);
    run_ok(&args);

    let model = ModelFile::load(&out.join(names::MODEL)).unwrap();
    let (w, a, b) = FIXTURE_GARCH;
    for g in &model.garch {
        let p = g.params;
        assert!((p.alpha - a).abs() < 0.03, "{p:?}");
        assert!((p.beta - b).abs() < 0.04, "{p:?}");
        let long_run = w / (1.0 - a - b);
        assert!((p.unconditional_variance() / long_run - 1.0).abs() < 0.5, "{p:?}");
    }
    let d = &model.dcc.params;
    assert!((d.theta1 - FIXTURE_DCC.0).abs() < 0.03, "{d:?}");
    assert!((d.theta2 - FIXTURE_DCC.1).abs() < 0.05, "{d:?}");
    let gauss = model.entry(Family::Gaussian).unwrap().fit.as_ref().unwrap();
    let CopulaSpec::Gaussian { corr } = &gauss.spec else { panic!() };
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!((corr.get(i, j) - 0.5).abs() < 0.05, "{}", corr.get(i, j));
    }
    assert!(model.copulas.iter().all(|c| c.error.is_none()));

    // goodness of fit: all families, energy nonnegative
    let (h8, t8) = read_csv(&out.join(names::TABLE8));
    assert_eq!(h8, ["Copula Family", "AIC", "BIC", "Energy Score"]);
    assert_eq!(t8.len(), 4);
    assert!(t8.iter().all(|r| r[3].parse::<f64>().unwrap() >= 0.0));
    let (_, t5) = read_csv(&out.join(names::TABLE5));
    assert_eq!(t5.len(), 4);

    // risk tables pass the printed identity
    let (_, t4) = read_csv(&out.join(names::TABLE4));
    let mut sum = 0.0;
    for r in &t4[..t4.len() - 1] {
        let (v, c, dc): (f64, f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!(format!("{:.6}", c - v), r[3]);
        sum += dc;
    }
    assert_eq!(t4.last().unwrap()[0], "Systemic Impact");
    assert_eq!(format!("{sum:.6}"), t4.last().unwrap()[3]);
    let (_, t6) = read_csv(&out.join(names::TABLE6));
    assert_eq!(t6.len(), 3);

    // plot data
    let (_, grid) = read_csv(&out.join(names::DENSITY_GRID));
    for f in ["Gaussian", "Student-t", "Clayton", "Gumbel"] {
        assert_eq!(grid.iter().filter(|r| r[0] == f).count(), 2500, "{f}");
    }
    let (_, qq) = read_csv(&out.join(names::QQ));
    assert!(qq.iter().all(|r| {
        let p: f64 = r[1].parse().unwrap();
        (0.01..=0.99).contains(&p)
    }));
    let (_, hist) = read_csv(&out.join(names::HISTOGRAM));
    assert_eq!(hist.len(), 3 * 40);
}
