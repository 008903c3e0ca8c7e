use std::path::Path;
use std::process::{Command, Output};

fn rowsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rowsparse"))
        .args(args)
        .env_remove("ROWSPARSE_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, trials: usize) -> String {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{
  "grid": [
    {{"n1": 2, "n2": 32, "s": 2}}, {{"n1": 4, "n2": 32, "s": 2}},
    {{"n1": 8, "n2": 32, "s": 2}}, {{"n1": 16, "n2": 32, "s": 2}}
  ],
  "noise": {{"family": "gaussian", "param": 1.0, "seed": 0}},
  "penalty": {{"lambda": 4.0}},
  "trials": {trials},
  "base_seed": 11
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&rowsparse(&["frobnicate"])), 1);
    assert_eq!(code(&rowsparse(&["estimate", "--lambda", "1"])), 1);
    assert_eq!(code(&rowsparse(&["--help"])), 0);
}

#[test]
fn estimate_writes_matrix_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.csv");
    std::fs::write(&input, "3,0.1\n-0.2,0.05\n").unwrap();
    let output = dir.path().join("m.csv");
    let report = dir.path().join("r.json");
    let out = rowsparse(&[
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--lambda",
        "0.5",
        "--output",
        output.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let m = rowsparse::RealMatrix::read_csv(&output).unwrap();
    assert_eq!(m.entries(), &[3.0, 0.0, 0.0, 0.0]);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["k_star"], 1);
    assert_eq!(r["kept_threshold"], 9.0);
    assert_eq!(r["schedule_head"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_input_is_an_error() {
    let out = rowsparse(&[
        "estimate",
        "--input",
        "/no/such/y.csv",
        "--lambda",
        "1",
        "--output",
        "/tmp/x.csv",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/y.csv"));
}

#[test]
fn simulate_is_reproducible_and_seed_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 40);
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rowsparse"));
        cmd.args(["simulate", "--config", &cfg, "--format", "json"]);
        match seed {
            Some(s) => cmd.env("ROWSPARSE_SEED", s),
            None => cmd.env_remove("ROWSPARSE_SEED"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0);
        let v: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
        v.iter()
            .map(|r| r["mean"].as_f64().unwrap())
            .collect::<Vec<f64>>()
    };
    assert_eq!(run(None), run(None));
    assert_eq!(run(Some("11")), run(None));
    assert_eq!(run(Some("12")).len(), 4);
    let bad = Command::new(env!("CARGO_BIN_EXE_rowsparse"))
        .args(["simulate", "--config", &cfg])
        .env("ROWSPARSE_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
}

#[test]
fn sweep_check_passes_and_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 30);
    let svg = dir.path().join("fit.svg");
    let out = rowsparse(&[
        "sweep",
        "--config",
        &cfg,
        "--check",
        "--format",
        "svg",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<path").count(), 1);
}

#[test]
fn sweep_on_degenerate_grid_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"grid": [{"n1": 2, "n2": 16, "s": 2}], "noise": {"family": "gaussian", "param": 1.0, "seed": 0},
            "penalty": {"lambda": 4.0}, "trials": 5, "base_seed": 1}"#,
    )
    .unwrap();
    let out = rowsparse(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn checks_pass_on_defaults() {
    assert_eq!(code(&rowsparse(&["check", "tail", "--trials", "200"])), 0);
    assert_eq!(
        code(&rowsparse(&[
            "check", "pack", "--n1", "4", "--n2", "16", "--s", "2"
        ])),
        0
    );
    let out = rowsparse(&["check", "oracle", "--trials", "200"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["c_fit_95_at_signal"].as_f64().unwrap() > 0.0);
}

#[test]
fn failed_certificate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("p.json");
    let out = rowsparse(&[
        "pack",
        "--n1",
        "2",
        "--n2",
        "4",
        "--s",
        "2",
        "--dmin",
        "4",
        "--budget",
        "50",
        "--c-target",
        "10",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let file: rowsparse::packing::PackFile =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let pack = file.to_packing().unwrap();
    assert!(pack.d_min_achieved.is_none_or(|d| d >= 4));
}

#[test]
fn rates_reports_both_regimes() {
    let hard: serde_json::Value = serde_json::from_str(&stdout(&rowsparse(&[
        "rates", "--n1", "4", "--n2", "8", "--s", "2",
    ])))
    .unwrap();
    assert!((hard["rate"].as_f64().unwrap() - 19.090354888959126).abs() < 1e-9);
    let soft: serde_json::Value = serde_json::from_str(&stdout(&rowsparse(&[
        "rates", "--n1", "3", "--n2", "4", "--s", "1", "--q", "1",
    ])))
    .unwrap();
    assert_eq!(soft["rate"], 12.0);
    assert_eq!(
        code(&rowsparse(&[
            "rates", "--n1", "3", "--n2", "4", "--s", "1.5"
        ])),
        1
    );
}
