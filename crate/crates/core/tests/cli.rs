use std::fs;
use std::process::{Command, Output};

fn ksym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksym")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_csv_rows() {
    let o = ksym(&["run", "--tau", "0.01", "--t-final", "1", "--record-every", "10"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,energy_rel_aug,energy_rel_orig,copy_div_max,c1,c2,c3,c4");
    // t = 0, 0.1, ..., 1.0
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("0.0,0.0,0.0,0.0,"));
    assert!(lines[11].starts_with("1.0,"));
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 8);
    }
}

#[test]
fn run_is_deterministic() {
    let args = ["run", "--model", "gyro", "--method", "ksym4", "--tau", "0.01", "--t-final", "0.5"];
    assert_eq!(ksym(&args).stdout, ksym(&args).stdout);
}

#[test]
fn zero_horizon_gives_initial_row() {
    let o = ksym(&["run", "--t-final", "0", "--initial", "0.1,0.5,-0.2,0.3"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "0.0,0.0,0.0,0.0,0.1,0.5,-0.2,0.3");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    fs::write(&cfg, "# short run\ntau = 0.1\nt_final = 0.5\nrecord_every = 1\n").unwrap();
    let o = ksym(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    // tau from the flag, horizon from the file: 10 steps plus the initial row.
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "speed = 3\n").unwrap();
    assert_eq!(code(&ksym(&["run", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&ksym(&["run", "--tau", "-1"])), 2);
    assert_eq!(code(&ksym(&["run", "--method", "rk4"])), 2);
    assert_eq!(code(&ksym(&["run", "--tau", "0.03", "--t-final", "1"])), 2);
}

#[test]
fn order_needs_three_taus() {
    assert_eq!(code(&ksym(&["order", "--taus", "0.1"])), 2);
}

#[test]
fn blow_up_exits_3() {
    let o = ksym(&["run", "--tau", "5", "--t-final", "50"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));
}

#[test]
fn order_reports_slopes() {
    let o = ksym(&["order", "--method", "ksym2", "--taus", "0.01,0.005,0.0025,0.00125"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("slope"));
}

#[test]
fn verify_invariants_pass() {
    let o = ksym(&["verify", "--suite", "invariants"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn corrupted_tableau_fails_orders() {
    let o = ksym(&["verify", "--suite", "orders", "--corrupt-tableau"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|l| l.contains("rk3")), "{failing:?}");
}
