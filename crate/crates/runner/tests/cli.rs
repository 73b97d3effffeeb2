use std::fs;
use std::process::Command;

const ORDERING: &str = r#"
scenario = "ordering-report"
name = "gap"

[grid]
axes = [{ n = 64, lower = -4.0, upper = 4.0, boundary = "dirichlet" }]

[ordering]
b = { kind = "polynomial", coeffs = [0.0, 0.0, 1.0] }

[checks]
ordering_gap = 1e-3
"#;

fn hvquant() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hvquant"));
    c.env_remove("HVQUANT_OUT");
    c
}

#[test]
fn runs_a_scenario_into_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gap.toml");
    fs::write(&cfg, ORDERING).unwrap();
    let out = hvquant()
        .args(["ordering", "--config"])
        .arg(&cfg)
        .env("HVQUANT_OUT", dir.path().join("runs"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pass gap"));
    assert!(dir.path().join("runs/gap/manifest.toml").exists());
    assert!(dir.path().join("runs/gap/ordering_gap.csv").exists());
}

#[test]
fn subcommand_must_match_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gap.toml");
    fs::write(&cfg, ORDERING).unwrap();
    let out = hvquant().args(["evolve", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hvquant ordering"));
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, ORDERING.replace("coeffs", "coefs")).unwrap();
    let out = hvquant().args(["ordering", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ordering.b") && err.contains("coefs"), "{err}");
}

#[test]
fn failing_check_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gap.toml");
    fs::write(&cfg, ORDERING.replace("ordering_gap = 1e-3", "ordering_gap = 0.0")).unwrap();
    let out = hvquant().args(["ordering", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}

#[test]
fn check_runs_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scenarios");
    fs::create_dir(&scen).unwrap();
    fs::write(scen.join("a.toml"), ORDERING).unwrap();
    fs::write(scen.join("b.toml"), ORDERING.replace("name = \"gap\"", "name = \"gap2\"")).unwrap();
    fs::write(scen.join("notes.txt"), "ignored").unwrap();
    let out = hvquant().args(["check", "--dir"]).arg(&scen).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2, "{stdout}");
    assert!(lines[0].starts_with("PASS") && lines[0].contains("gap"));
}
