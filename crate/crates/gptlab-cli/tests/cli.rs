//! End-to-end checks of the binary: exit codes, verdicts, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gptlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("gptlab-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn game_row_matches_printed_values() {
    let out = run(&["game", "--sides", "4", "--system", "8"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("0.5"));
    assert!(text.contains("PASS"));
}

#[test]
fn game_json_format() {
    let out = run(&["game", "--sides", "3", "--system", "6", "--format", "json"]);
    assert!(out.status.success());
    let row: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(row["verdict"], "PASS");
    assert!((row["lp_value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn pentagon_neighbours_are_not_distinguishable() {
    let theory = tmp("pentagon.json");
    let out = run(&["polygon", "--sides", "5", "--out", theory.to_str().unwrap()]);
    assert!(out.status.success());
    let out = run(&[
        "distinguish",
        "--theory",
        theory.to_str().unwrap(),
        "--states",
        "0,1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOT_DISTINGUISHABLE"));
    let out = run(&[
        "distinguish",
        "--theory",
        theory.to_str().unwrap(),
        "--states",
        "0,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("DISTINGUISHABLE"));
}

#[test]
fn square_census_has_two_decompositions() {
    let theory = tmp("square.json");
    run(&["polygon", "--sides", "4", "--out", theory.to_str().unwrap()]);
    let out = run(&[
        "qc-find",
        "--theory",
        theory.to_str().unwrap(),
        "--max-degree",
        "2",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("decompositions\t2"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "sweep-game",
        "--sides-from",
        "3",
        "--sides-to",
        "7",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn theory_json_round_trips_bytes() {
    let theory = tmp("heptagon.json");
    run(&["polygon", "--sides", "7", "--out", theory.to_str().unwrap()]);
    let first = std::fs::read(&theory).unwrap();
    // Re-emitting from the loaded file must give the same bytes: load the
    // theory through the fidelity command to prove it parses, then re-emit.
    let out = run(&[
        "fidelity",
        "--theory",
        theory.to_str().unwrap(),
        "--a",
        "0",
        "--b",
        "0",
    ]);
    assert!(out.status.success());
    run(&["polygon", "--sides", "7", "--out", theory.to_str().unwrap()]);
    assert_eq!(first, std::fs::read(&theory).unwrap());
}

#[test]
fn programming_pipeline_builds_verifies_audits() {
    let inst = tmp("instance.json");
    let out = run(&[
        "program-build-channel",
        "--system",
        "simplex:2",
        "--apparatus",
        "simplex:3",
        "--programs",
        "0,1,2",
        "--dynamics",
        "id|perm:1,0|const:1",
        "--out",
        inst.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&["program-verify", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict\tPASS"));
    let out = run(&["audit", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn square_apparatus_reversible_build_refuses() {
    let out = run(&[
        "program-build-reversible",
        "--system",
        "simplex:3",
        "--apparatus",
        "polygon:4",
        "--blocks",
        "0,1|2,3",
        "--dynamics",
        "id|perm:1,2,0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("BUILD_FAILED"));
}

#[test]
fn reversible_build_works_on_simplex_apparatus() {
    let inst = tmp("rev.json");
    let out = run(&[
        "program-build-reversible",
        "--system",
        "polygon:5",
        "--apparatus",
        "simplex:2",
        "--blocks",
        "0|1",
        "--dynamics",
        "rot:1|refl:0",
        "--out",
        inst.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&["program-verify", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["game", "--sides", "4"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    // malformed file
    let path = tmp("broken.json");
    std::fs::write(&path, "{\"name\": 3}").unwrap();
    let out = run(&["decompose", "--theory", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_override_via_env() {
    let out = bin()
        .env("GPTLAB_TOL", "1e-5")
        .args(["game", "--sides", "6", "--system", "6"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = bin()
        .env("GPTLAB_TOL", "2.0")
        .args(["game", "--sides", "6", "--system", "6"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
