use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use finsler_plap::cli::{BarrierReport, Manifest, RunStatus, WulffReport};
use finsler_plap::config::AdmissibilityReport;
use finsler_plap::material::OssermanVerdict;
use finsler_plap::verify::{HopfReport, RegularityReport};
use finsler_plap::SolveReport;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler-plap"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn strict<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn solve_torsion_has_center_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve"], &fixture("torsion.json"), dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let header = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(header.starts_with("x,y,u,ux,uy\n"));
    let center = rows(&dir.path().join("field.csv"))
        .into_iter()
        .find(|r| r[0] == 0.0 && r[1] == 0.0)
        .expect("origin is a node");
    assert!((center[2] - 0.25).abs() < 2e-3);
    let report: SolveReport = strict(&dir.path().join("solve_report.json"));
    assert!(report.final_residual <= 1e-8);
    let manifest: Manifest = strict(&dir.path().join("manifest.json"));
    assert_eq!(manifest.status, RunStatus::Ok);
    assert_eq!(manifest.seed, 0);
    assert_eq!(manifest.config_sha256.len(), 64);
}

#[test]
fn wulff_euclidean_rows_on_unit_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["wulff"], &fixture("torsion.json"), dir.path());
    assert!(out.status.success());
    let pts = rows(&dir.path().join("shape.csv"));
    assert_eq!(pts.len(), 512);
    for r in pts {
        assert!((r[1].hypot(r[2]) - 1.0).abs() <= 1e-10);
    }
    let report: WulffReport = strict(&dir.path().join("wulff_report.json"));
    assert!(report.convex);
}

#[test]
fn regularity_reports_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["regularity"], &fixture("torsion.json"), dir.path());
    assert!(out.status.success());
    let study = rows(&dir.path().join("study.csv"));
    assert_eq!(study.len(), 3);
    assert!((study[2][1] - std::f64::consts::FRAC_PI_2).abs() < 0.03 * std::f64::consts::FRAC_PI_2);
    let report: RegularityReport = strict(&dir.path().join("regularity_report.json"));
    assert_eq!(report.per_refinement.len(), 3);
    let hopf: HopfReport = strict(&dir.path().join("hopf_report.json"));
    assert!(hopf.min_normal_derivative > 0.0);
}

#[test]
fn barrier_and_verify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["barrier"], &fixture("barrier.json"), dir.path());
    assert!(out.status.success());
    let report: BarrierReport = strict(&dir.path().join("barrier_report.json"));
    assert!((report.shoot_slope - 1.0 / std::f64::consts::LN_2).abs() < 1e-6);
    assert!(report.hopf_margin.unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &fixture("anisotropic.json"), dir.path());
    assert!(out.status.success());
    let adm: AdmissibilityReport = strict(&dir.path().join("admissibility.json"));
    assert!(adm.duality_residual < 1e-10 && adm.c1_est > 0.0);
}

#[test]
fn rejected_config_exits_one_with_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_finsler-plap"))
        .args(["verify", "--set", "material.p=1", "--config"])
        .arg(fixture("torsion.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.contains("(iii)"), "{stderr}");

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        "{\n  \"domain\": {\"kind\": \"disk\", \"radius\": 1},\n  \"colour\": 1\n}",
    )
    .unwrap();
    let out = run(&["solve"], &bad, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line"));
}

#[test]
fn numeric_failure_keeps_flagged_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_finsler-plap"))
        .args([
            "solve",
            "--set",
            "material.p=4",
            "--set",
            "max_iter=1",
            "--config",
        ])
        .arg(fixture("torsion.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let manifest: Manifest = strict(&dir.path().join("manifest.json"));
    assert_eq!(manifest.status, RunStatus::NumericFailure);
    assert!(manifest.partial);
    assert!(dir.path().join("field.partial.csv").exists());
}

#[test]
fn sqrt_source_is_accepted_unchecked() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_finsler-plap"))
        .args([
            "verify",
            "--set",
            r#"source.g={"kind":"power","coef":1,"exponent":0.5}"#,
            "--seed",
            "7",
        ])
        .arg("--config")
        .arg(fixture("torsion.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: Manifest = strict(&dir.path().join("manifest.json"));
    assert_eq!(
        manifest.admissibility.osserman_verdict,
        OssermanVerdict::Unchecked
    );
    assert_eq!(manifest.seed, 7);
}
