use std::path::PathBuf;

use randopt_cli::{load_problem, parse_problem, DocumentError};
use randopt_core::SetDescription;

fn gallery(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../gallery")
        .join(name)
}

const MINIMAL: &str = r#"{
  "schema_version": 1,
  "space": { "scenarios": [1, 2], "weights": [0.5, 0.5], "atoms": [[1, 2]] },
  "dimension": 1,
  "objective": { "expression": "x1^2" }
}"#;

#[test]
fn minimal_document_gets_default_options() {
    let p = parse_problem(MINIMAL).unwrap();
    assert_eq!(p.options.grid, 101);
    assert_eq!(p.options.starts, 9);
    assert_eq!(p.options.seed, 0);
    assert!(!p.options.polish);
    assert_eq!(p.options.tol_rel, 1e-9);
    assert!(p.feasible_set.is_none() && p.search_box.is_none() && p.candidate.is_none());
    assert_eq!(p.space.len(), 2);
}

#[test]
fn quartic_gallery_document_loads() {
    let p = load_problem(&gallery("quartic.json")).unwrap();
    assert_eq!(p.space.scenarios(), &[1, 2, 3]);
    assert_eq!(p.space.atoms().len(), 2);
    assert_eq!(p.options.grid, 401);
    let set = p.feasible_set.unwrap();
    match set.description(0) {
        SetDescription::Box(b) => {
            assert_eq!(b.lower(), &[-2.0]);
            assert_eq!(b.upper(), &[2.0]);
        }
        other => panic!("expected a box, got {other:?}"),
    }
    assert_eq!(p.candidate.unwrap().values(), &[vec![1.0], vec![1.0], vec![-1.0]]);
}

#[test]
fn every_valid_gallery_document_loads() {
    for entry in std::fs::read_dir(gallery("")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let result = load_problem(&path);
        if name.starts_with("bad_") {
            assert!(result.is_err(), "{name} should be rejected");
        } else {
            result.unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}

#[test]
fn weights_not_summing_to_one_point_at_weights() {
    let text = MINIMAL.replace("[0.5, 0.5]", "[0.7, 0.5]");
    let err = parse_problem(&text).unwrap_err();
    assert!(matches!(err, DocumentError::Schema { .. }), "{err:?}");
    assert_eq!(err.pointer(), Some("/space/weights"));
}

#[test]
fn bad_expression_reports_byte_offset() {
    let text = MINIMAL.replace("x1^2", "x1^^2");
    match parse_problem(&text).unwrap_err() {
        DocumentError::Parse { pointer, offset, .. } => {
            assert_eq!(pointer, "/objective/expression");
            assert_eq!(offset, 3);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_a_schema_error() {
    let text = MINIMAL.replace("\"dimension\": 1", "\"dimension\": 1, \"colour\": 3");
    let err = parse_problem(&text).unwrap_err();
    assert!(matches!(err, DocumentError::Schema { .. }), "{err:?}");
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn nested_type_error_points_into_the_document() {
    let text = MINIMAL.replace("\"atoms\": [[1, 2]]", "\"atoms\": [[1, \"two\"]]");
    let err = parse_problem(&text).unwrap_err();
    assert_eq!(err.pointer(), Some("/space/atoms/0/1"));
}

#[test]
fn wrong_point_dimension_is_rejected() {
    let text = MINIMAL.replace(
        "\"objective\"",
        "\"feasible_set\": { \"points\": [[0.0], [1.0, 2.0]] }, \"objective\"",
    );
    let err = parse_problem(&text).unwrap_err();
    assert!(err.pointer().unwrap().starts_with("/feasible_set"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_problem(&gallery("does_not_exist.json")).unwrap_err();
    assert!(matches!(err, DocumentError::Io { .. }));
    assert_eq!(err.pointer(), None);
}

#[test]
fn garbage_text_is_rejected_without_panicking() {
    for text in ["", "{", "[]", "null", "{\"schema_version\": -1}", "\u{0}"] {
        assert!(parse_problem(text).is_err(), "{text:?}");
    }
}
