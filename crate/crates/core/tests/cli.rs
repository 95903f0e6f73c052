use std::process::Command;

fn qdsense(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qdsense")).args(args).output().unwrap()
}

#[test]
fn husimi_subcommand_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = qdsense(&["husimi", "--out", dir.path().to_str().unwrap(), "--n", "20", "--seed", "5", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("manifest.json").is_file());
    assert!(String::from_utf8_lossy(&out.stdout).contains("husimi.csv"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = qdsense(&["response", "--out", out_dir, "--delta-phi", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qdsense(&["response", "--config", "/nonexistent/qdsense.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qdsense(&["mse-profile", "--out", &format!("{out_dir}/mse-profile"), "--n", "20"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qdsense(&["hybrid", "--out", out_dir, "--sigma-det", "0,-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/husimi.toml");
    let out = qdsense(&["response", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2));
}
