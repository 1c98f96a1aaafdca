use std::path::Path;
use std::process::{Command, Output};

fn fcspdc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcspdc")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn configs_table_lists_every_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let ktp = fcspdc(dir.path(), &["configs"]);
    assert!(ktp.status.success());
    assert_eq!(stdout(&ktp).lines().count(), 9);
    let ln = fcspdc(dir.path(), &["--crystal", "ln", "configs"]);
    let text = stdout(&ln);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(3).unwrap().starts_with("III"));
}

#[test]
fn gvm_writes_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcspdc(dir.path(), &["gvm", "--lo", "700", "--hi", "3000", "--samples", "21", "--output", "gvm.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("gvm.csv")).unwrap();
    assert!(text.starts_with("condition,lambda_s_nm,lambda_i_nm,lambda_p_nm,degenerate"));
    assert!(text.lines().any(|l| l.ends_with(",true")));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["gvm", "--lo", "10", "--hi", "3000"][..],
        &["--grid-points", "8", "configs"],
        &["analyze", "--lambda-deg", "1300", "--config", "IX"],
        &["analyze", "--lambda-deg", "2000"],
        &["--crystal", "quartz", "configs"],
    ] {
        let o = fcspdc(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unknown_config_file_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "crystal = \"ktp\"\ngrid_size = 64\n").unwrap();
    let o = fcspdc(dir.path(), &["--config-file", "run.toml", "configs"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn below_cutoff_is_a_physics_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcspdc(dir.path(), &["analyze", "--lambda-deg", "300"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absorption"));
    let s = fcspdc(dir.path(), &["--crystal", "ln", "sweep", "--lo", "400", "--hi", "600", "--points", "2"]);
    assert_eq!(s.status.code(), Some(3));
}

#[test]
fn analyze_writes_report_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcspdc(dir.path(), &["--pmf", "gaussian", "--grid-points", "64", "--out-dir", "o", "analyze", "--lambda-deg", "1300", "--config", "II", "--dump-jsa", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("config II"));
    let out = dir.path().join("o");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("analyze_ktp_gaussian_1300nm.json")).unwrap()).unwrap();
    let p = report["result"]["best"]["evaluation"]["report"]["purity"].as_f64().unwrap();
    assert!(p > 0.99 && p <= 1.0 + 1e-9, "purity {p}");
    for name in ["jsa", "jca", "effective"] {
        let f = out.join(format!("analyze_ktp_gaussian_1300nm_{name}.csv"));
        assert!(std::fs::metadata(&f).unwrap().len() > 0, "{name}");
    }
}

#[test]
fn sweep_resumes_from_its_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--pmf", "gaussian", "--grid-points", "64", "--out-dir", "s", "sweep", "--lo", "1300", "--hi", "1300", "--points", "1", "--no-conventional", "--figures"];
    let first = fcspdc(dir.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let out = dir.path().join("s");
    assert!(out.join("sweep_ktp_gaussian.json").exists());
    assert!(out.join("figures").join("fig6a.csv").exists());
    let csv = std::fs::read_to_string(out.join("sweep_ktp_gaussian.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1300"));

    let again = fcspdc(dir.path(), &args);
    assert!(again.status.success());
    assert!(stdout(&again).contains("resuming: 1 of 1"));
    let fresh = fcspdc(dir.path(), &[&args[..], &["--fresh"]].concat());
    assert!(!stdout(&fresh).contains("resuming"));
}
