use std::path::Path;
use std::process::{Command, Output};

use rkhs_logrank::cli::ResultDocument;

fn exe() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rkhs-logrank"));
    c.env_remove("RKHS_LOGRANK_THREADS");
    c
}

fn gtsg() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/gtsg.csv")
        .to_str()
        .unwrap()
        .to_string()
}

fn doc(out: &Output) -> ResultDocument {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gtsg_sek_and_lrp() {
    let sek = exe()
        .args([
            "test",
            "--input",
            &gtsg(),
            "--kernel",
            "sek",
            "--sigma",
            "0.1",
            "--bootstrap",
            "10000",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    let sek = doc(&sek);
    assert!(sek.p_value < 0.02, "{}", sek.p_value);
    assert_eq!(sek.bandwidth, Some(0.1));
    assert!(sek.timestamp.is_some());
    assert_eq!((sek.n, sek.n0, sek.n1), (90, 45, 45));

    let lrp = doc(&exe()
        .args(["test", "--input", &gtsg(), "--kernel", "lrp", "--seed", "1"])
        .output()
        .unwrap());
    assert!(lrp.p_value > 0.05);
    assert!(!lrp.reject);
}

#[test]
fn three_row_inline_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("three.csv");
    std::fs::write(&input, "time,event,group\n1,1,0\n2,1,0\n3,1,1\n").unwrap();
    let out = exe()
        .args([
            "test",
            "--input",
            input.to_str().unwrap(),
            "--kernel",
            "lrp",
            "--bootstrap",
            "1",
            "--seed",
            "0",
        ])
        .output()
        .unwrap();
    let d = doc(&out);
    assert_eq!(d.statistic, 1.5625);
    assert_eq!(d.bootstrap.replicates, 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"statistic\": 1.5625"));
}

#[test]
fn thread_env_is_validated() {
    let out = exe()
        .args(["test", "--input", &gtsg()])
        .env("RKHS_LOGRANK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[E_ENV]:") && err.lines().count() == 1, "{err}");
}

#[test]
fn decision_does_not_change_exit_status() {
    let out = exe()
        .args([
            "test",
            "--input",
            &gtsg(),
            "--kernel",
            "lrc",
            "--bootstrap",
            "500",
            "--deterministic",
        ])
        .output()
        .unwrap();
    let d = doc(&out);
    assert!(d.reject);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn simulate_rejects_out_of_range_theta() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args([
            "simulate",
            "--family",
            "periodic",
            "--theta-grid",
            "20",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[E_SIMULATION]:"), "{err}");
}
