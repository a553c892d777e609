use std::fs;
use std::process::{Command, Output};

fn exe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pima-exp")).args(args).output().expect("binary runs")
}

const SINGLE_CELL: &str = r#"{
  "base": { "n_users": 5, "total_rate": 0.2, "horizon_frames": 10 },
  "lambda_grid": [0.2],
  "schedulers": ["GFEO"],
  "seeds": [3]
}"#;

#[test]
fn single_cell_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cell.json");
    fs::write(&cfg, SINGLE_CELL).unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let out = exe(&["simulate", "--config", cfg.to_str().unwrap()]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("scheduler,n_users,lambda_total,seed_count,frames,eta_mean"));
    assert!(text.lines().nth(1).unwrap().starts_with("GFEO,5,0.2,1,10,"));
}

#[test]
fn rerun_overwrites_with_identical_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let args = [
        "simulate", "--preset", "fig3", "--frames", "200", "--seeds", "2", "--lambda", "0.05,0.4", "--out",
        out.to_str().unwrap(),
    ];
    assert!(exe(&args).status.success());
    let first = fs::read(&out).unwrap();
    assert!(exe(&args).status.success());
    assert_eq!(first, fs::read(&out).unwrap());
    // five schedulers × two rates + header
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 11);
}

#[test]
fn plot_script_is_written_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2.csv");
    let status = exe(&[
        "simulate", "--preset", "fig2", "--frames", "100", "--seeds", "1", "--lambda", "0.3", "--plot", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let script = fs::read_to_string(out.with_extension("py")).unwrap();
    assert!(script.contains("Avg. Frame Efficiency"));
    assert!(script.contains("S-GFEO"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, SINGLE_CELL.replace("\"n_users\": 5", "\"n_users\": 30")).unwrap();
    let out = exe(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gfeo_max_users"));

    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(exe(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(exe(&["simulate", "--preset", "fig2", "--lambda", "-0.1"]).status.code(), Some(2));
    assert_eq!(exe(&["simulate"]).status.code(), Some(2));
}

#[test]
fn calibrate_reports_and_succeeds() {
    let out = exe(&["calibrate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}
