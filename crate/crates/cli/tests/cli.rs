use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "axis_value,input_logneg,output_logneg,success_weight,pre_norm_trace,cutoff";

fn cvqnd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqnd")).args(args).output().expect("binary runs")
}

fn cvqnd_line(line: &str) -> Output {
    cvqnd(&line.split_whitespace().collect::<Vec<_>>())
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn single_run_writes_one_row() {
    let out = cvqnd_line("protocol1 --r 0.345 --kappa 0.5 --kind xp --eta 1 --cutoff 12");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "0.345");
    assert_eq!(fields[1], "0.69");
    assert_eq!(fields[5], "12");
    assert!(fields[2].parse::<f64>().unwrap() > 0.69);
}

#[test]
fn out_of_range_efficiency_is_a_usage_error() {
    let out = cvqnd(&["protocol1", "--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("eta"));
}

#[test]
fn unknown_and_inapplicable_flags_are_rejected() {
    assert_eq!(cvqnd(&["protocol1", "--lambda", "1"]).status.code(), Some(2));
    let out = cvqnd(&["protocol1", "--theta", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("theta"));
    assert_eq!(
        cvqnd(&["sweep", "--protocol", "one_bs", "--axis", "kappa", "--values", "0.1"]).status.code(),
        Some(2)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "r = 0.345\n\n[protocol1]\nkappa = 0.5 # overridden below\neta = 0.9\n").unwrap();
    let run = |extra: &[&str], name: &str| {
        let csv = dir.path().join(name);
        let mut args = vec!["protocol1", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = cvqnd(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
        summary["config"].clone()
    };
    let from_file = run(&[], "a.csv");
    assert_eq!(from_file["kappa"], 0.5);
    assert_eq!(from_file["r"], 0.345);
    assert_eq!(from_file["eta"], 0.9);
    let overridden = run(&["--kappa", "0.1"], "b.csv");
    assert_eq!(overridden["kappa"], 0.1);
    assert_eq!(overridden["eta"], 0.9);
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[protocol1]\ngain = 3\n").unwrap();
    let out = cvqnd(&["protocol1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gain"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    let out =
        cvqnd(&["sweep", "--protocol", "one", "--axis", "r", "--values", "", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read(&csv).unwrap(), format!("{HEADER}\n").into_bytes());
}

#[test]
fn fifty_point_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let csv = dir.path().join(name);
        let out = cvqnd_line(&format!(
            "sweep --protocol one --axis r --values 0.01:1.2:50 --kappa 0.5 --jobs {jobs} --out {}",
            csv.display()
        ));
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        csv
    };
    let (a, b) = (run("a.csv", "1"), run("b.csv", "3"));
    let lines = rows(&a);
    assert_eq!(lines.len(), 51);
    assert!(!fs::read_to_string(&a).unwrap().contains('\r'));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let axis: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(axis.windows(2).all(|w| w[0] < w[1]));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["points"], 50);
    assert_eq!(summary["succeeded"], 50);
    assert_eq!(summary["failed"], 0);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn failing_points_give_nonzero_exit_and_an_error_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    let out =
        cvqnd_line(&format!("sweep --protocol one --axis eta --values 0.5,1.5 --out {}", csv.display()));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("point 1"));
    let lines = rows(&csv);
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2], "1.5,,,,,");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["failed"], 1);
    assert_eq!(summary["errors"][0]["index"], 1);
}

#[test]
fn adaptive_cutoff_reports_drift() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("adaptive.csv");
    let out =
        cvqnd(&["baseline", "--r", "0.3", "--adaptive", "--cutoff", "6", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["cutoff_drift"]["points"], 1);
    assert!(summary["cutoff_drift"]["max"].as_f64().unwrap() < 1e-4);
}

#[test]
fn homodyne_outcome_pair_and_sweep_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p2.cfg");
    fs::write(
        &cfg,
        "[sweep]\nprotocol = two\naxis = theta\nvalues = 0,0.5\n[protocol2]\nz = 0.1,-0.1\nxi = 0.9\n",
    )
    .unwrap();
    let out = cvqnd(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}
