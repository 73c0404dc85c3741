use std::path::Path;
use std::process::{Command, Output};

fn ppgen(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppgen"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PPGEN_SEED")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn export_world_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["export-world", "--seed", "4", "--lx", "0.5", "--conf", "weak"];
    for dir in [&a, &b] {
        let out = ppgen(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["world_lattice.csv", "world_curves.csv"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
    let lattice = read(&a.path().join("world_lattice.csv"));
    assert_eq!(lattice.lines().count(), 101 * 101 + 1);
    assert_eq!(lattice.lines().next(), Some("x,u,fom0,fom1,ps,pa"));
}

#[test]
fn combo_filter_restricts_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppgen(
        &[
            "figure3",
            "--scale",
            "0.01",
            "--combo",
            "n1=200,lx=0.5,conf=none",
            "--estimators",
            "OM,ABC",
            "--degrees",
            "1",
            "--format",
            "both",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("figure3.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("combo_id,n1,l_x_fom1,l_u_pa,alpha_u_pa,estimator,degree,rmse,bias_sq,variance"));
    assert!(lines[1..].iter().all(|l| l.contains("n1=200,lx=0.5,conf=none")));
    let json: serde_json::Value = serde_json::from_str(&read(&dir.path().join("figure3.json"))).unwrap();
    assert_eq!(json["rows"].as_array().map(Vec::len), Some(2));
}

#[test]
fn checks_report_pass_and_the_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ppgen(&["checks", "--check", "orthonormality"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS orthonormality"));
    assert!(read(&dir.path().join("checks.csv")).starts_with("check,passed,detail\n"));

    let bad = ppgen(&["checks", "--check", "orthonormality", "--corrupt-basis"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).starts_with("FAIL orthonormality"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"checks": ["orthonormality"], "format": "json"}"#).unwrap();
    let out = ppgen(&["checks", "--config", cfg.to_str().unwrap(), "--format", "csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("checks.csv").exists());
    assert!(!dir.path().join("checks.json").exists());
}

#[test]
fn bad_arguments_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["figure3", "--scale", "0"][..],
        &["figure3", "--estimators", "NOPE"],
        &["figure3", "--combo", "n1=3"],
        &["export-world", "--conf", "huge"],
        &["no-such-command"],
    ] {
        let out = ppgen(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"sede": 3}"#).unwrap();
    assert_eq!(ppgen(&["checks", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}
