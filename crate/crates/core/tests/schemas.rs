use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn report(dir: &Path, args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_spatial-edr"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn check(name: &str, instance: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

#[test]
fn every_report_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("f.cfg"), "field.kind = moving-average\nfield.weights = diamond\nfield.dims = 20,20\n").unwrap();
    std::fs::write(p.join("t.csv"), "i1,i2\n8,8\n12,5\n").unwrap();
    let setup: &[&[&str]] = &[
        &["simulate", "--config", "f.cfg", "--format", "csv", "--out", "field.csv"],
        &["simulate", "--kind", "single-index", "--dims", "20,20", "--format", "csv", "--out", "data.csv"],
    ];
    for args in setup {
        assert!(Command::new(env!("CARGO_BIN_EXE_spatial-edr"))
            .current_dir(p)
            .args(*args)
            .status()
            .unwrap()
            .success());
    }
    let cases: &[(&str, &[&str])] = &[
        ("field", &["simulate", "--config", "f.cfg"]),
        ("dataset", &["simulate", "--kind", "single-index", "--dims", "5,5"]),
        ("sir-fit-report", &["sir-fit", "--data", "data.csv"]),
        ("rate-report", &["rate-bench", "--sizes", "100,144,196", "--replicates", "5", "--oracle-draws", "2000", "--record-time"]),
        ("clt-report", &["clt-check", "--size", "64", "--replicates", "100", "--oracle-draws", "2000"]),
        ("edr-sweep-report", &["edr-sweep", "--sizes", "400", "--seeds", "2"]),
        ("predict-report", &["predict", "--field", "field.csv", "--targets", "t.csv", "--d", "4"]),
        ("neighbor-scan-report", &["neighbor-scan", "--field", "field.csv", "--dmax", "4"]),
    ];
    for (name, args) in cases {
        check(name, &report(p, args));
    }
}

#[test]
fn schemas_reject_missing_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = report(dir.path(), &["edr-sweep", "--sizes", "400", "--seeds", "2"]);
    v["meta"].as_object_mut().unwrap().remove("master_seed");
    let validator = jsonschema::validator_for(&schema("edr-sweep-report")).unwrap();
    assert!(!validator.is_valid(&v));
}
