use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lckf-lab")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(dir: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(dir.join("steps.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

const MINIMAL: &str = r#"{
  "model": {
    "horizon": 5,
    "F": {"dims": [1, 1], "data": [[0.9]]},
    "H": {"dims": [2, 1], "data": [[1.0], [0.5]]},
    "Cw": {"dims": [1, 1], "data": [[0.1]]},
    "Cv": {"dims": [2, 2], "data": [[1.0, 0.0], [0.0, 1.0]]},
    "x0_mean": [0.0],
    "Cx0": {"dims": [1, 1], "data": [[1.0]]}
  },
  "schedule": "kf",
  "experiment": {"trials": 200}
}"#;

#[test]
fn minimal_run_writes_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("minimal.json");
    std::fs::write(&file, MINIMAL).unwrap();
    let out = tmp.path().join("out");
    let o = lab(&["run", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][..5], ["step", "est_mse_trace", "theo_mse_trace", "bias_norm", "constraint_residual"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["horizon"], 5);
    assert_eq!(report["trials"], 200);
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = lab(&["run", scenario("reference.json").to_str().unwrap(), "--seed", "7", "--trials", "500", "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(out.join("steps.csv")).unwrap(), std::fs::read(out.join("report.json")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn thread_cap_does_not_change_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = tmp.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_lckf-lab"))
            .env("LCKF_LAB_THREADS", threads)
            .args(["run", scenario("reference.json").to_str().unwrap(), "--trials", "600", "--out-dir", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("steps.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
    let o = Command::new(env!("CARGO_BIN_EXE_lckf-lab"))
        .env("LCKF_LAB_THREADS", "zero")
        .args(["validate", scenario("reference.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_scenario_names_the_offending_key() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.json");
    std::fs::write(&file, MINIMAL.replace("\"Cv\"", "\"Cvv\"")).unwrap();
    let o = lab(&["run", file.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Cvv"), "{}", stderr(&o));

    std::fs::write(&file, MINIMAL.replace(r#""dims": [2, 1]"#, r#""dims": [3, 1]"#)).unwrap();
    let o = lab(&["run", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.H"), "{}", stderr(&o));

    std::fs::write(&file, "{ \"model\": ").unwrap();
    assert_eq!(lab(&["validate", file.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lab(&["validate", tmp.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_model_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("indefinite.json");
    std::fs::write(&file, MINIMAL.replace("[[0.1]]", "[[-0.1]]")).unwrap();
    let o = lab(&["run", file.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn runtime_failures_exit_with_code_four() {
    // The dynamic model is outside the static regime required by the lcmve preset.
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("lcmve.json");
    std::fs::write(&file, MINIMAL.replace("\"schedule\": \"kf\"", "\"schedule\": \"lcmve\"")).unwrap();
    let o = lab(&["run", file.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn self_comparison_gives_identical_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("kfkf");
    let o = lab(&["compare", scenario("reference.json").to_str().unwrap(), "--filters", "kf,kf", "--trials", "300", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out);
    assert_eq!(column(&rows, "trace_kf"), column(&rows, "trace_kf#2"));
}

#[test]
fn kalman_column_is_below_lmvdrf_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let o = lab(&["compare", scenario("reference.json").to_str().unwrap(), "--filters", "lmvdrf,kf", "--trials", "300", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out);
    let (kf, lmvdrf) = (column(&rows, "trace_kf"), column(&rows, "trace_lmvdrf"));
    assert_eq!(kf.len(), 10);
    assert!(kf.iter().zip(&lmvdrf).all(|(a, b)| a <= b));
}

#[test]
fn bad_filter_lists_are_argument_errors() {
    let path = scenario("reference.json");
    for filters in ["", ",", "kf,unknown"] {
        let o = lab(&["compare", path.to_str().unwrap(), "--filters", filters]);
        assert_eq!(o.status.code(), Some(2), "--filters {filters:?}: {}", stderr(&o));
    }
    assert_eq!(lab(&["compare", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_reports_pass_skip_and_fail() {
    let o = lab(&["validate", scenario("reference.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = lab(&["validate", scenario("lmvdrf.json").to_str().unwrap()]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("PASS") && l.contains("recursion_vs_batch")), "{table}");

    let o = lab(&["validate", scenario("correlated_violation.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("FAIL") && l.contains("uncorrelation_conditions")), "{table}");
    assert!(table.lines().any(|l| l.starts_with("SKIP") && l.contains("recursion_vs_batch")), "{table}");
}

#[test]
fn horizon_override_truncates_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("short");
    let o = lab(&["run", scenario("reference.json").to_str().unwrap(), "--horizon", "4", "--trials", "100", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&out).len(), 5);
}
