use std::path::PathBuf;

use jsonschema::{Draft, JSONSchema};
use randopt_cli::{execute, to_json, Command, Overrides};
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(name: &str) -> JSONSchema {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    JSONSchema::options()
        .with_draft(Draft::Draft202012)
        .compile(&value)
        .unwrap()
}

fn gallery_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(root().join("gallery"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

fn errors(schema: &JSONSchema, value: &Value) -> Vec<String> {
    match schema.validate(value) {
        Ok(()) => Vec::new(),
        Err(errs) => errs.map(|e| format!("{}: {e}", e.instance_path)).collect(),
    }
}

#[test]
fn gallery_documents_match_the_problem_schema() {
    let schema = schema("problem.schema.json");
    for file in gallery_files() {
        let value: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
        let errs = errors(&schema, &value);
        assert!(errs.is_empty(), "{}: {errs:?}", file.display());
    }
}

#[test]
fn problem_schema_rejects_unknown_fields() {
    let schema = schema("problem.schema.json");
    let doc = serde_json::json!({
        "schema_version": 1,
        "space": { "scenarios": [1], "weights": [1.0], "atoms": [[1]] },
        "dimension": 1,
        "objective": { "expression": "x1" },
        "colour": "red"
    });
    assert!(!errors(&schema, &doc).is_empty());
}

#[test]
fn every_report_matches_the_report_schema() {
    let schema = schema("report.schema.json");
    for file in gallery_files() {
        for command in Command::ALL {
            for polish in [false, true] {
                let overrides = Overrides {
                    polish,
                    ..Overrides::default()
                };
                let report = execute(command, &file, &overrides);
                let value: Value = serde_json::from_str(&to_json(&report)).unwrap();
                let errs = errors(&schema, &value);
                assert!(errs.is_empty(), "{} {}: {errs:?}", file.display(), command.name());
            }
        }
    }
}

#[test]
fn report_schema_ties_status_to_exit_code() {
    let schema = schema("report.schema.json");
    let bad = serde_json::json!({
        "schema_version": 1,
        "command": "oracle",
        "status": "refused",
        "exit_code": 2,
        "error": { "kind": "non_measurable_objective", "message": "", "details": { "atom": [1], "first": 1, "second": 2 } }
    });
    assert!(!errors(&schema, &bad).is_empty());
}
