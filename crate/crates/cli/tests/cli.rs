//! End-to-end tests of the command-line interface and its exit-code
//! contract: 0 = property holds, 1 = property fails, 2 = malformed input.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochbisim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn check_bisim_passes_on_degenerate_pair() {
    let out = run(&[
        "check",
        "bisim",
        fixture("example1_sys1.json").to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
        "--relation",
        fixture("example1_rel.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("holds"), "{text}");
    for id in ["h0", "h1", "h2", "h3", "h4", "h5"] {
        assert!(text.contains(id), "missing {id} in:\n{text}");
    }
    assert!(text.contains("tolerances"), "{text}");
}

#[test]
fn check_bisim_fails_with_h5_named_on_full_noise_pair() {
    let out = run(&[
        "check",
        "bisim",
        fixture("example3_sys1.json").to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
        "--relation",
        fixture("example3_rel.json").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 1);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["verdict"], "fails");
    let failing_h5 = doc["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "h5" && c["passed"] == false)
        .expect("an h5 failure");
    assert_eq!(failing_h5["note"], "system 1");
}

#[test]
fn check_ext_passes_on_full_noise_pair() {
    let out = run(&[
        "check",
        "ext",
        fixture("example3_sys1.json").to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
        "--relation",
        fixture("example3_rel.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
}

#[test]
fn check_bisim_without_relation_on_degenerate_pair_is_malformed() {
    let out = run(&[
        "check",
        "bisim",
        fixture("example1_sys1.json").to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--relation"));
}

#[test]
fn check_lin_dimension_mismatch_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = dir.path().join("t.json");
    std::fs::write(&t_path, r#"{"schema_version":"1","T":[[1.0,0.0],[0.0,1.0]]}"#).unwrap();
    let out = run(&[
        "check",
        "lin",
        fixture("example1_sys1.json").to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
        "--transform",
        t_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn check_realization_on_unstable_system_is_an_error() {
    let out = run(&[
        "check",
        "realization",
        fixture("example1_sys2.json").to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unstable"));
}

#[test]
fn malformed_document_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":"1","n":2,"m":1,"l":1,"p":1,
           "A":[[1.0,0.0]],"B":[[1.0],[0.0]],"C":[[1.0,0.0]],
           "G":[[1.0],[0.0]],"mu":[0.0],"Psi":[[0.0]]}"#,
    )
    .unwrap();
    let out = run(&[
        "check",
        "ext",
        bad.to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("field A"));
}

#[test]
fn maximal_relation_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rel_path = dir.path().join("rel.json");
    let out = run(&[
        "maximal-relation",
        "ext",
        fixture("example3_sys1.json").to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
        "--output",
        rel_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    // The produced relation makes the external check pass.
    let out = run(&[
        "check",
        "ext",
        fixture("example3_sys1.json").to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
        "--relation",
        rel_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    // Loading and re-saving reproduces the file byte for byte.
    let text = std::fs::read_to_string(&rel_path).unwrap();
    let doc: stochbisim::io::RelationDocument = serde_json::from_str(&text).unwrap();
    let rel = doc.into_relation().unwrap();
    let again = stochbisim::io::RelationDocument::from_relation(
        &rel,
        Some("maximal external".into()),
    );
    assert_eq!(
        serde_json::to_string_pretty(&again).unwrap() + "\n",
        text
    );
}

#[test]
fn reduce_ext_yields_scalar_system() {
    let dir = tempfile::tempdir().unwrap();
    let out_sys = dir.path().join("reduced.json");
    let out_rel = dir.path().join("relation.json");
    let out_cert = dir.path().join("cert.txt");
    let out = run(&[
        "reduce",
        "ext",
        fixture("example3_sys1.json").to_str().unwrap(),
        "--output",
        out_sys.to_str().unwrap(),
        "--relation-out",
        out_rel.to_str().unwrap(),
        "--certificate-out",
        out_cert.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: stochbisim::io::SystemDocument =
        serde_json::from_str(&std::fs::read_to_string(&out_sys).unwrap()).unwrap();
    assert_eq!(doc.n, 1);
    let cert = std::fs::read_to_string(&out_cert).unwrap();
    assert!(cert.contains("observability quotient"), "{cert}");

    // The reduced scalar system has equivalent external behavior to the
    // scalar fixture.
    let out = run(&[
        "check",
        "ext",
        out_sys.to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn simulate_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("ensemble.txt");
    let out = run(&[
        "simulate",
        fixture("example1_sys1.json").to_str().unwrap(),
        "--seed",
        "7",
        "--trajectories",
        "50",
        "--horizon",
        "5",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("support deviation"), "{text}");
    let table = std::fs::read_to_string(&out_path).unwrap();
    assert!(table.starts_with("# trajectory t x0 x1 y0\n"));
    assert_eq!(table.lines().count(), 1 + 50 * 6);
    // The degenerate coordinate is exactly zero in every row.
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(' ').collect();
        assert_eq!(cols[3], "0");
    }
}

#[test]
fn simulate_rejects_divergent_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("ensemble.txt");
    let out = run(&[
        "simulate",
        fixture("example1_sys1.json").to_str().unwrap(),
        "--x0",
        "0,1",
        "--trajectories",
        "2",
        "--horizon",
        "1100",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    // x[1] doubles each step from 1, passing 1e300 around t = 997.
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magnitude"));
}

#[test]
fn validate_passes_on_bisimilar_pair_with_boxes() {
    let out = run(&[
        "validate",
        fixture("example1_sys1.json").to_str().unwrap(),
        fixture("example1_sys2.json").to_str().unwrap(),
        "--relation",
        fixture("example1_rel.json").to_str().unwrap(),
        "--boxes",
        fixture("example1_boxes.json").to_str().unwrap(),
        "--trajectories",
        "20000",
        "--horizon",
        "4",
        "--seed",
        "3",
    ]);
    assert_eq!(
        code(&out),
        0,
        "stdout: {}\nstderr: {}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("output-law comparison"));
}

#[test]
fn validate_fails_on_mismatched_pair() {
    // Relation pairs the observed coordinate of the first system with the
    // state of a scalar system having different dynamics.
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("other.json");
    std::fs::write(
        &other,
        r#"{"schema_version":"1","n":1,"m":1,"l":1,"p":1,
           "A":[[0.5]],"B":[[1.0]],"C":[[1.0]],"G":[[1.0]],
           "mu":[0.0],"Psi":[[0.0]]}"#,
    )
    .unwrap();
    let out = run(&[
        "validate",
        fixture("example1_sys1.json").to_str().unwrap(),
        other.to_str().unwrap(),
        "--relation",
        fixture("example1_rel.json").to_str().unwrap(),
        "--x0-1",
        "1,0",
        "--x0-2",
        "1",
        "--trajectories",
        "20000",
        "--horizon",
        "4",
    ]);
    assert_eq!(code(&out), 1, "stdout: {}", stdout(&out));
}

#[test]
fn tolerance_flags_are_honored_and_reported() {
    // An absurdly loose equality gate makes the full-noise pair "pass" h3
    // but h5 still fails (it is a rank condition, not an equality).
    let out = run(&[
        "check",
        "bisim",
        fixture("example3_sys1.json").to_str().unwrap(),
        fixture("example3_sys2.json").to_str().unwrap(),
        "--relation",
        fixture("example3_rel.json").to_str().unwrap(),
        "--eq-abs",
        "1e-3",
        "--format",
        "json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["tolerances"]["eq_abs"], 1e-3);
    assert_eq!(code(&out), 1);
}

#[test]
fn env_tolerances_apply_when_flags_absent() {
    let out = Command::new(env!("CARGO_BIN_EXE_stochbisim"))
        .env("STOCHBISIM_EQ_ABS", "2.5e-7")
        .args([
            "check",
            "ext",
            fixture("example1_sys1.json").to_str().unwrap(),
            fixture("example1_sys2.json").to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["tolerances"]["eq_abs"], 2.5e-7);
}
