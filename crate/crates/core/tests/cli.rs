use std::process::Command;

fn qrl(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qrl-lake")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(qrl(&[]).0, 1);
    assert_eq!(qrl(&["frobnicate"]).0, 1);
    assert_eq!(qrl(&["train", "--model", "pqc20"]).0, 1);
    assert_eq!(qrl(&["grid", "--only", "pqc1,xyz"]).0, 1);
    assert_eq!(qrl(&["--help"]).0, 0);
}

#[test]
fn run_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(qrl(&["report", "--only", "pqc1", "--out", out]).0, 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "minibatch_size = 100\n").unwrap();
    assert_eq!(qrl(&["oracle", "--config", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn circuit_dump_and_oracle() {
    let (code, text) = qrl(&["circuits", "dump", "--id", "9"]);
    assert_eq!(code, 0);
    assert!(text.contains("W 33"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#') && l.contains(" CZ ")).count(), 3);
    let (code, text) = qrl(&["oracle"]);
    assert_eq!(code, 0);
    assert!(text.contains("reward threshold"));
}

#[test]
fn published_correlations() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = qrl(&["correlate", "--published", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.starts_with("metric,target,pearson,spearman,n\n"));
    assert_eq!(text.lines().count(), 7);
    assert!(dir.path().join("scatter.csv").exists());
}
