//! End-to-end checks of the command line contract: exit codes and report
//! shapes, on the fast check groups only.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kummerlab"))
}

#[test]
fn curve_subcommand_prints_branch_points() {
    let out = bin().args(["curve"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("degree 5"));
    assert!(text.contains("<- marked"));
}

#[test]
fn invalid_curve_exits_with_one() {
    let dir = std::env::temp_dir().join("kummerlab-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    // x^3 (x-1)^2: repeated root
    std::fs::write(
        &path,
        r#"{"f": [[0,0],[0,0],[0,0],[1,0],[-2,0],[1,0],[0,0]], "eta_index": 0}"#,
    )
    .unwrap();
    let out = bin()
        .args(["periods", "--curve"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("squarefree"), "stderr: {err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = bin().args(["verify"]).output().unwrap(); // missing group
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["verify", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_periods_writes_a_report() {
    let dir = std::env::temp_dir().join("kummerlab-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let report = dir.join("report.json");
    let out = bin()
        .args(["verify", "periods", "--json"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["schema"], "kummerlab-report-1");
    assert!(doc["pass"].as_bool().unwrap());
    assert!(doc["records"].as_array().unwrap().len() >= 3);
}
