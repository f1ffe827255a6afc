use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varp-stokes"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn csv_study_writes_all_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.csv");
    let log = dir.path().join("run.jsonl");
    let o = run(&[
        "study",
        "--max-level",
        "2",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
        "--run-log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,h,tau,e_F,e_Fstar,e_phistar,e_L2,eoc_F,eoc_Fstar,eoc_phistar,eoc_L2");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(",,,,"));

    let events: Vec<serde_json::Value> = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let count = |kind: &str| events.iter().filter(|e| e["event"] == kind).count();
    assert_eq!(count("level_start"), 3);
    assert_eq!(count("level_done"), 3);
    // 4 + 8 + 16 time steps
    assert_eq!(count("step"), 28);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# cell\np_minus = 2.5\nalpha = 0.5\nmax_level = 3\nformat = csv\n").unwrap();
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--max-level", "1", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["p_minus"], 2.5);
    assert_eq!(report["config"]["alpha"], 0.5);
    assert_eq!(report["config"]["max_level"], 1);
    assert_eq!(report["levels"].as_array().unwrap().len(), 2);
    assert_eq!(report["expected_rate"], 0.5 * 0.5 * 3.5 / 2.5);
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(code(&run(&["study", "--case", "2", "--p-minus", "1.5"])), 2);
    assert_eq!(code(&run(&["study", "--max-level", "8"])), 2);
    assert_eq!(code(&run(&["study", "--set", "unknown_key=1"])), 2);
    assert_eq!(code(&run(&["study", "--config", "/nonexistent/run.cfg"])), 2);
    assert_eq!(code(&run(&["study", "--set", "quad_degree_error=5"])), 2);
}

#[test]
fn solver_failure_exits_3_with_partial_report() {
    let o = run(&["study", "--max-level", "1", "--set", "newton_max_iter=1", "--format", "json"]);
    assert_eq!(code(&o), 3);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["failure"]["level"], 0);
    assert_eq!(report["failure"]["exit_code"], 3);
}

#[test]
fn table_mismatch_exits_4() {
    // level 4 carries the first published EOC; a zero tolerance cannot hold
    let o = run(&["study", "--max-level", "4", "--format", "csv", "--check-tables", "0"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("table mismatch"), "{err}");
    assert!(err.contains("published 0.734"), "{err}");
}

#[test]
fn matrix_skips_invalid_cells() {
    let o = run(&[
        "matrix",
        "--p-minus",
        "1.5,2.0",
        "--alpha",
        "1.0",
        "--cases",
        "1,2",
        "--max-level",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let md = String::from_utf8(o.stdout).unwrap();
    assert_eq!(md.matches("## EOC(").count(), 4);
    // case 2 row: p- = 1.5 skipped, p- = 2 computed
    let row = md
        .lines()
        .skip_while(|l| !l.starts_with("Case 2"))
        .find(|l| l.starts_with("| 1 |"))
        .unwrap();
    let cells: Vec<&str> = row.split('|').map(str::trim).collect();
    assert_eq!(cells[2], "---");
    assert!(cells[3].parse::<f64>().is_ok(), "{row}");
}

#[test]
fn verify_reports_every_suite() {
    let o = run(&["verify", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let checks: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(checks.len(), 11);
    assert!(checks.iter().all(|c| c["passed"] == true));
}
