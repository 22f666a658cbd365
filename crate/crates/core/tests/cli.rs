use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    root.join(name).to_string_lossy().into_owned()
}

fn sckmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sckmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn build_birth_death_reports_28_states() {
    let bd = model("birth_death.sck");
    let o = sckmc(&["build", "--model", &bd, "--delta", "1e-9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("states,transitions,iterations,converged,build_seconds")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "28");
    assert_eq!(row[3], "true");
}

#[test]
fn build_writes_exports() {
    let dir = tempfile::tempdir().unwrap();
    let bd = model("birth_death.sck");
    let out = dir.path().to_string_lossy().into_owned();
    let o = sckmc(&["build", "--model", &bd, "--delta", "1e-9", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let transitions = std::fs::read_to_string(dir.path().join("transitions.txt")).unwrap();
    assert!(transitions.starts_with("STATES 29 "), "{transitions}");
    let states = std::fs::read_to_string(dir.path().join("states.csv")).unwrap();
    assert!(states.starts_with("index,X,kappa\n"));
    assert_eq!(states.lines().count(), 29);
    assert!(dir.path().join("pi_trace.csv").exists());
}

#[test]
fn check_at_time_zero_is_unsatisfied() {
    let bd = model("birth_death.sck");
    let o = sckmc(&[
        "check", "--model", &bd, "--property", "F(t <= 5, X >= 3)", "--time", "0", "--delta",
        "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,lower,upper,epsilon"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[0], 0.0);
    assert_eq!(row[1], 0.0);
    assert!(row[2] <= 1e-10, "{row:?}");
}

#[test]
fn check_series_rows() {
    let bd = model("birth_death.sck");
    let o = sckmc(&[
        "check", "--model", &bd, "--property", "F(t <= 30, X >= 3)", "--times", "0:30:10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
    assert!(rows.iter().all(|r| r[1] <= r[2]));
}

#[test]
fn sweep_single_delta_gives_one_row() {
    let bd = model("birth_death.sck");
    let o = sckmc(&[
        "sweep", "--model", &bd, "--property", "F(t <= 10, X >= 5)", "--delta", "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "delta,states,lower,upper,epsilon,build_seconds,check_seconds"
    );
    assert_eq!(lines.len(), 2);
}

#[test]
fn simulate_writes_trajectory() {
    let bd = model("birth_death.sck");
    let o = sckmc(&[
        "simulate", "--model", &bd, "--horizon", "10", "--interval", "5", "--seed", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time,X");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,0"));
}

#[test]
fn ssa_mode_check() {
    let bd = model("birth_death.sck");
    let o = sckmc(&[
        "check", "--model", &bd, "--property", "F(t <= 10, X >= 1)", "--mode", "ssa", "--runs",
        "200",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("time,estimate,std_error,runs\n"));
}

#[test]
fn bad_input_exits_2() {
    let bd = model("birth_death.sck");
    let missing = sckmc(&["build", "--model", "/nonexistent/model.sck"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_prop = sckmc(&["check", "--model", &bd, "--property", "F(t <= , X)"]);
    assert_eq!(bad_prop.status.code(), Some(2));
    let unknown = sckmc(&["check", "--model", &bd, "--property", "F(t <= 1, Y > 2)"]);
    assert_eq!(unknown.status.code(), Some(2));
    let bad_delta = sckmc(&["build", "--model", &bd, "--delta", "1.5"]);
    assert_eq!(bad_delta.status.code(), Some(2));
    let no_bounds = sckmc(&["build", "--model", &bd, "--mode", "reference"]);
    assert_eq!(no_bounds.status.code(), Some(2));
    assert!(!no_bounds.stderr.is_empty());
}

#[test]
fn analysis_failure_exits_1() {
    let bd = model("birth_death.sck");
    let o = sckmc(&["build", "--model", &bd, "--delta", "1e-9", "--state-cap", "5"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn reference_mode_build() {
    let bd = model("birth_death.sck");
    let o = sckmc(&["build", "--model", &bd, "--mode", "reference", "--bounds", "X=299"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("300,"), "{row}");
}
