use std::path::Path;
use std::process::Command;

use imdd_cli::commands::{cmd_sweep, cmd_thresholds, csv_header};
use imdd_cli::config::RunConfig;
use imdd_core::ThresholdRule;

fn imdd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_imdd"))
}

fn resolve(json: &str) -> imdd_cli::config::Resolved {
    RunConfig::from_json(json, "test").unwrap().resolve().unwrap()
}

#[test]
fn csv_header_matches_golden_file() {
    let golden = include_str!("golden/sweep_header_all_rules.csv");
    assert_eq!(format!("{}\n", csv_header(&ThresholdRule::ALL)), golden);

    let r = resolve(
        r#"{"preset": "pam4", "oma_grid_dbm": {"start": 0, "stop": 0, "step": 1},
                       "rules": ["optimal", "uniform-exact", "approx", "awgn"], "mc": {"enabled": false}}"#,
    );
    let out = cmd_sweep(&r).unwrap();
    assert_eq!(out.csv.lines().next().unwrap(), golden.trim_end());
}

#[test]
fn empty_rules_keep_mi_columns() {
    let r = resolve(r#"{"preset": "pam6", "oma_grid_dbm": {"start": 0, "stop": 2, "step": 1}, "rules": []}"#);
    let out = cmd_sweep(&r).unwrap();
    let lines: Vec<&str> = out.csv.lines().collect();
    assert_eq!(lines[0], "oma_dbm,mi_bits,entropy_bits,status");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn pam4_reference_sweep_has_seventeen_rows() {
    let r = resolve(
        r#"{"preset": "pam4", "oma_grid_dbm": {"start": -2, "stop": 14, "step": 1},
            "rules": ["optimal", "approx"], "mc": {"enabled": false}}"#,
    );
    let out = cmd_sweep(&r).unwrap();
    assert_eq!(out.csv.lines().count(), 18);
    for p in &out.results {
        let (a, b) = (p.rules[0].analytic_ser.unwrap(), p.rules[1].analytic_ser.unwrap());
        assert!(a <= b * (1.0 + 1e-12));
    }
}

#[test]
fn echoed_config_reproduces_outputs() {
    let r = resolve(
        r#"{"preset": "pam6", "oma_grid_dbm": {"start": -2, "stop": 0, "step": 1},
            "mc": {"seed": 42, "max_symbols": 300000, "batch": 50000}}"#,
    );
    let first = cmd_sweep(&r).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&first.json).unwrap();
    let echo = serde_json::to_string(&doc["config"]).unwrap();
    let again = cmd_sweep(&resolve(&echo)).unwrap();
    assert_eq!(first.csv, again.csv);
    assert_eq!(first.json, again.json);
}

#[test]
fn thresholds_report_every_variant() {
    let r = resolve(r#"{"preset": "pam4", "link": {"rin_db_hz": "off"}, "oma_dbm": 0}"#);
    let out = cmd_thresholds(&r).unwrap();
    assert_eq!(out.variants.len(), 4);
    for v in &out.variants {
        assert_eq!(v.thresholds.as_deref().unwrap(), &[-2.0, 0.0, 2.0]);
    }

    let r = resolve(
        r#"{"preset": "pam4", "oma_dbm": 2,
            "constellation": {"points": [-3, -1, 1, 3], "probs": [0.3, 0.4, 0.3, 0.0]}}"#,
    );
    let out = cmd_thresholds(&r).unwrap();
    let optimal = &out.variants[0];
    assert!(optimal.pairs[2]
        .error
        .as_deref()
        .unwrap()
        .contains("zero symbol probability"));
    assert!(optimal.pairs[0].threshold.is_some() && optimal.pairs[0].map_residual.unwrap().abs() < 1e-9);
    // probability-blind variants are unaffected
    assert!(out.variants[2].thresholds.is_some());
}

fn run(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = imdd().args(args).current_dir(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, _, err) = run(
        &[
            "sweep",
            "--preset",
            "pam4",
            "--oma-start",
            "0",
            "--oma-stop",
            "1",
            "--oma-step",
            "0",
        ],
        d,
    );
    assert_eq!(code, 2);
    assert!(err.contains("oma_grid_dbm.step"), "{err}");

    std::fs::write(
        d.join("bad.json"),
        "{\n  \"preset\": \"pam4\",\n  \"mc\": {\"seeds\": 1}\n}\n",
    )
    .unwrap();
    let (code, _, err) = run(&["sweep", "--config", "bad.json"], d);
    assert_eq!(code, 2);
    assert!(err.contains("bad.json:3:") && err.contains("mc.seeds"), "{err}");

    let (code, _, err) = run(&["optimize", "--preset", "pam6", "--oma", "4", "--mode", "ps-ser"], d);
    assert_eq!(code, 2);
    assert!(err.contains("h_min"), "{err}");

    // a vanishing symbol probability breaks the optimal rule at every point
    std::fs::write(
        d.join("zero.json"),
        r#"{"preset": "pam4", "rules": ["optimal"], "mc": {"enabled": false},
            "constellation": {"points": [-3, -1, 1, 3], "probs": [0.5, 0.5, 0, 0]},
            "oma_grid_dbm": {"start": 0, "stop": 2, "step": 1}}"#,
    )
    .unwrap();
    let (code, out, _) = run(&["sweep", "--config", "zero.json"], d);
    assert_eq!(code, 3);
    assert_eq!(out.lines().filter(|l| l.ends_with("threshold_error")).count(), 3);

    let (code, out, _) = run(&["thresholds", "--preset", "pam6", "--oma", "0"], d);
    assert_eq!(code, 0);
    assert!(out.contains("uniform-exact"));
}

#[test]
fn optimize_writes_constellation_document() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, out, err) = run(
        &[
            "optimize",
            "--preset",
            "pam6",
            "--oma",
            "0",
            "--mode",
            "gs",
            "--out-constellation",
            "gs.json",
            "--out-json",
            "report.json",
        ],
        d,
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("before") && out.contains("after"));
    let c: imdd_core::Constellation =
        serde_json::from_str(&std::fs::read_to_string(d.join("gs.json")).unwrap()).unwrap();
    assert_eq!((c.points()[0], c.points()[5]), (-5.0, 5.0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let before = report["before"]["ser_optimal"].as_f64().unwrap();
    let after = report["after"]["ser_optimal"].as_f64().unwrap();
    assert!(after < before);
    assert!(report["before"]["ser_approx"].as_f64().is_some());
}
