use std::path::PathBuf;
use std::process::{Command, Output};

fn optmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optmom"))
        .args(args)
        .env_remove("OPTMOM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn cylinder() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios/cylinder.toml")
        .display()
        .to_string()
}

#[test]
fn passing_scenario_exits_zero() {
    let o = optmom(&["check", "--scenario", "torus"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn failing_check_exits_one() {
    let o = optmom(&[
        "check",
        "--scenario",
        "c3",
        "--select",
        "action.axioms.*",
        "--tol",
        "inv=1e-30",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["check", "--scenario", "nope"][..],
        &["check", "--scenario", "torus", "--tol", "bogus=1"],
        &["check", "--scenario", "torus", "--select", "no.such.*"],
        &["check"],
        &["orbit", "--scenario", "torus", "0.1", "0.1,1.0"],
        &["reduce", "--scenario", "r3"],
        &["check", "--file", "/nonexistent/scenario.toml"],
    ] {
        let o = optmom(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn torus_orbit_answers() {
    let yes = stdout(&optmom(&[
        "orbit",
        "--scenario",
        "torus",
        "0.1,1.0",
        "2.0,1.0",
    ]));
    assert!(yes.starts_with("yes\nword: X_sin_theta2@"), "{yes}");
    let no = stdout(&optmom(&[
        "orbit",
        "--scenario",
        "torus",
        "0.1,1.0",
        "0.1,2.0",
    ]));
    assert!(no.starts_with("no\nwitness: theta2"), "{no}");
    let same = stdout(&optmom(&[
        "orbit",
        "--scenario",
        "torus",
        "0.1,1.0",
        "0.1,1.0",
    ]));
    assert_eq!(same, "yes\nword: \n");
}

#[test]
fn reduce_dumps_forms() {
    let o = optmom(&["reduce", "--scenario", "c3", "--label", "cp2_r1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("reduced dimension: 4"));
    assert!(text.contains("mw.form.cp2_r1"));
    let csv = stdout(&optmom(&[
        "reduce",
        "--scenario",
        "c3",
        "--label",
        "cp2_r1",
        "--format",
        "csv",
    ]));
    assert!(csv.starts_with("sample,row,col,value\n"));
    assert_eq!(csv.lines().count(), 1 + 10 * 16);
    for (scenario, label) in [("torus", "theta2_1"), ("z2", "origin")] {
        let o = optmom(&["reduce", "--scenario", scenario, "--label", label]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("reduced space is a point"));
    }
}

#[test]
fn csv_is_deterministic_and_seeded() {
    let run = |seed: &str| {
        stdout(&optmom(&[
            "check",
            "--scenario",
            "fixtures",
            "--format",
            "csv",
            "--seed",
            seed,
        ]))
    };
    let a = run("42");
    assert_eq!(a, run("42"));
    assert_ne!(a, run("43"));
    let from_env = Command::new(env!("CARGO_BIN_EXE_optmom"))
        .args(["check", "--scenario", "fixtures", "--format", "csv"])
        .env("OPTMOM_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&from_env.stdout), a);
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("optmom-cli-{}.csv", std::process::id()));
    let o = optmom(&[
        "check",
        "--scenario",
        "r3",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(written.starts_with("check,"));
    assert!(o.stdout.is_empty());
}

#[test]
fn scenario_files_run() {
    let o = optmom(&["check", "--file", &cylinder()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("expect.orbit.1"));
    let o = optmom(&["orbit", "--file", &cylinder(), "0.1,1.0", "3.0,1.0"]);
    assert!(stdout(&o).starts_with("yes"));
}

#[test]
fn list_names_every_scenario() {
    let text = stdout(&optmom(&["list"]));
    for name in ["torus", "r3", "c3", "z2", "fixtures"] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{name}: "))),
            "{name}"
        );
    }
}
