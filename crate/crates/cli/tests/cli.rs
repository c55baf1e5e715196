use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pvpayback(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvpayback"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenarios_lists_185_rows() {
    let out = pvpayback(&["scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 186);
    assert!(text.starts_with("id,pv_kwp,battery_kwh,inverter_kva,inverter_family,gross_cost_eur"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("worst case 665"));
}

#[test]
fn hourly_run_writes_reports_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = pvpayback(&[
        "run",
        "--interval",
        "60",
        "--out",
        arg(&out_dir),
        "--prices",
        "--trace",
        "3",
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "scenarios.csv",
        "reports.csv",
        "summary.json",
        "prices.csv",
        "dispatch_3.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let reports = fs::read_to_string(out_dir.join("reports.csv")).unwrap();
    assert_eq!(reports.lines().count(), 186);
    let trace = fs::read_to_string(out_dir.join("dispatch_3.csv")).unwrap();
    assert_eq!(trace.lines().count(), 365 * 24 + 1);
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(
        summary.contains("\"config_hash\"") && summary.contains("\"catalog_version\": \"2021-03\"")
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "contract = \"C1\"\ninterval_minutes = 60\nyears = [2021]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = pvpayback(&[
        "run",
        "--config",
        arg(&cfg),
        "--contract",
        "C4",
        "--out",
        arg(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"contract\": \"C4\""));
    let header = fs::read_to_string(out_dir.join("reports.csv")).unwrap();
    assert!(header
        .lines()
        .next()
        .unwrap()
        .ends_with("payback_2021_years"));
}

#[test]
fn synthetic_profiles_feed_back_into_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profiles");
    let out = pvpayback(&[
        "synth-profiles",
        "--interval",
        "60",
        "--seed",
        "5",
        "--out",
        arg(&prof),
    ]);
    assert!(out.status.success());
    let out_dir = dir.path().join("out");
    let out = pvpayback(&[
        "run",
        "--interval",
        "60",
        "--load",
        arg(&prof.join("load.csv")),
        "--pv",
        arg(&prof.join("pv.csv")),
        "--out",
        arg(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_profile_is_rejected_with_row_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profiles");
    assert!(
        pvpayback(&["synth-profiles", "--interval", "60", "--out", arg(&prof)])
            .status
            .success()
    );
    let load = prof.join("load.csv");
    let text = fs::read_to_string(&load).unwrap();
    let broken: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 10)
        .map(|(_, l)| l)
        .collect();
    fs::write(&load, broken.join("\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = pvpayback(&[
        "run",
        "--interval",
        "60",
        "--load",
        arg(&load),
        "--pv",
        arg(&prof.join("pv.csv")),
        "--out",
        arg(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 11") && err.contains("gap"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn invalid_settings_exit_with_config_code() {
    let out = pvpayback(&["scenarios", "--band-low", "1.2", "--band-high", "1.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pvpayback(&["explain", "999", "--interval", "60"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_breaks_down_a_scenario() {
    let out = pvpayback(&["explain", "71", "--interval", "60"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scenario 71") && text.contains("payback") && text.contains("2024"));
}
