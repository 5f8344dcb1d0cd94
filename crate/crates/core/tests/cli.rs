use std::process::Command;

use cagegen::catalog::Catalog;

fn cagegen() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cagegen"))
}

#[test]
fn writes_a_parseable_complete_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("jv9.txt");
    let status = cagegen()
        .args(["--base", concat!(env!("CARGO_MANIFEST_DIR"), "/bases/jv.base")])
        .args(["--size", "9", "--backbone", "path", "--almost-foldable", "--workers", "2"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cat = Catalog::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(cat.header.complete);
    assert_eq!(cat.records.len(), 236);
}

#[test]
fn filter_narrows_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bridgeless.txt");
    let status = cagegen()
        .args(["--base", concat!(env!("CARGO_MANIFEST_DIR"), "/bases/jv.base")])
        .args(["--size", "6", "--almost-foldable", "--filter", "min_sparsity>=1,chiral=false"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cat = Catalog::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for r in &cat.records {
        let x = r.report.as_ref().unwrap();
        assert!(x.min_sparsity >= 1.into() && !x.chiral);
    }
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("bad.base");
    std::fs::write(&base, "colors: a\nmotif Y: ~a ~q\n").unwrap();
    let out = cagegen().arg("--base").arg(&base).args(["--size", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn exhausted_budget_exits_with_two() {
    let status = cagegen()
        .args(["--base", concat!(env!("CARGO_MANIFEST_DIR"), "/bases/jv.base")])
        .args(["--size", "14", "--budget", "1", "--workers", "1"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}
