use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const COMMANDS: [&str; 6] = [
    "solve-rop",
    "solve-rlop",
    "check-measurable",
    "stationary",
    "necessary",
    "oracle",
];

fn gallery_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../gallery")
}

fn gallery_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(gallery_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

struct Run {
    code: i32,
    text: String,
    report: Value,
}

fn run(command: &str, input: &Path, extra: &[&str], threads: Option<&str>) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_randopt"));
    cmd.arg(command)
        .arg("--input")
        .arg(input)
        .arg("--output")
        .arg(&out)
        .args(extra);
    match threads {
        Some(t) => cmd.env("RANDOPT_THREADS", t),
        None => cmd.env_remove("RANDOPT_THREADS"),
    };
    let status = cmd.output().unwrap().status;
    let text = std::fs::read_to_string(&out).unwrap();
    let report = serde_json::from_str(&text).unwrap();
    Run {
        code: status.code().unwrap(),
        text,
        report,
    }
}

fn expected_code(problem: &str, command: &str) -> i32 {
    match (problem, command) {
        ("bad_expression" | "bad_weights", _) => 3,
        ("shifted_vertex", "solve-rop" | "solve-rlop") => 1,
        ("cubic", "solve-rlop") => 2,
        ("empty_scenario", "solve-rop" | "oracle") => 2,
        // Missing sections the command needs, or a level set where enumeration is required.
        ("cubic" | "flip", "solve-rop") => 3,
        ("stationary_level_set", "solve-rop" | "oracle") => 3,
        ("empty_scenario", "solve-rlop" | "stationary") => 3,
        (p, "necessary") if p != "quartic" && p != "flip" => 3,
        _ => 0,
    }
}

#[test]
fn exit_codes_across_the_gallery() {
    let mut seen = [false; 4];
    for file in gallery_files() {
        let name = file.file_stem().unwrap().to_string_lossy().into_owned();
        for command in COMMANDS {
            let r = run(command, &file, &[], None);
            let expected = expected_code(&name, command);
            assert_eq!(r.code, expected, "{name} {command}: {}", r.text);
            assert_eq!(r.report["exit_code"], expected, "{name} {command}");
            assert_eq!(r.report["command"], command);
            assert_eq!(r.report["schema_version"], 1);
            let ok = expected == 0;
            assert_eq!(r.report.get("result").is_some(), ok, "{name} {command}");
            assert_eq!(r.report.get("error").is_some(), !ok, "{name} {command}");
            seen[expected as usize] = true;
        }
    }
    assert_eq!(seen, [true; 4]);
}

#[test]
fn refusal_carries_a_witness() {
    let r = run("solve-rop", &gallery_dir().join("shifted_vertex.json"), &[], None);
    assert_eq!(r.report["status"], "refused");
    assert_eq!(r.report["error"]["kind"], "non_measurable_objective");
    let details = &r.report["error"]["details"];
    assert_ne!(details["first"], details["second"]);
    let message = r.report["error"]["message"].as_str().unwrap();
    assert!(message.contains("not measurable"), "{message}");
}

#[test]
fn input_errors_carry_pointers() {
    let r = run("oracle", &gallery_dir().join("bad_expression.json"), &[], None);
    assert_eq!(r.report["error"]["kind"], "parse_error");
    assert_eq!(r.report["error"]["details"]["pointer"], "/objective/expression");
    assert_eq!(r.report["error"]["details"]["offset"], 3);

    let r = run("oracle", &gallery_dir().join("bad_weights.json"), &[], None);
    assert_eq!(r.report["error"]["kind"], "schema_error");
    assert_eq!(r.report["error"]["details"]["pointer"], "/space/weights");
}

#[test]
fn quartic_solve_rop_selects_minus_one() {
    let r = run("solve-rop", &gallery_dir().join("quartic.json"), &[], None);
    assert_eq!(r.code, 0);
    let result = &r.report["result"];
    assert_eq!(result["selection_verdict"]["verdict"], "measurable");
    assert_eq!(result["eta_verdict"]["verdict"], "measurable");
    for entry in result["selection"].as_array().unwrap() {
        let x = entry["x"][0].as_f64().unwrap();
        assert!((x + 1.0).abs() < 1e-12, "{entry}");
    }
    for entry in result["eta"].as_array().unwrap() {
        assert!((entry["value"].as_f64().unwrap() + 1.0).abs() < 1e-9, "{entry}");
    }
}

#[test]
fn flags_override_document_options() {
    let quartic = gallery_dir().join("quartic.json");
    let r = run("oracle", &quartic, &["--grid", "5"], None);
    assert_eq!(r.report["result"]["grid"], 5);
    let r = run("solve-rlop", &quartic, &["--seed", "99"], None);
    assert_eq!(r.report["result"]["seed"], 99);
    let r = run("solve-rop", &quartic, &["--polish"], None);
    assert!(r.report["result"].get("polished").is_some());
}

#[test]
fn grid_too_large_is_an_input_error() {
    let r = run(
        "oracle",
        &gallery_dir().join("convex_quadratic.json"),
        &["--grid", "100000"],
        None,
    );
    assert_eq!(r.code, 3);
}

#[test]
fn usage_errors_exit_with_input_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_randopt"))
        .arg("solve-rop")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));
    let status = Command::new(env!("CARGO_BIN_EXE_randopt"))
        .arg("--help")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_randopt"))
        .args(["oracle", "--input"])
        .arg(gallery_dir().join("quartic.json"))
        .arg("--output")
        .arg(dir.path().join("r.json"))
        .env("RANDOPT_THREADS", "many")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn reports_are_identical_across_thread_counts() {
    for name in [
        "quartic",
        "convex_quadratic",
        "per_atom_targets",
        "stationary_level_set",
    ] {
        let file = gallery_dir().join(format!("{name}.json"));
        for command in COMMANDS {
            let one = run(command, &file, &[], Some("1"));
            let four = run(command, &file, &[], Some("4"));
            assert_eq!(one.text, four.text, "{name} {command}");
        }
    }
}

#[test]
fn oracle_and_solve_rop_agree_on_optimal_values() {
    for file in gallery_files() {
        let name = file.file_stem().unwrap().to_string_lossy().into_owned();
        let rop = run("solve-rop", &file, &[], None);
        if rop.code != 0 {
            continue;
        }
        let oracle = run("oracle", &file, &[], None);
        assert_eq!(oracle.code, 0, "{name}");
        let eta = rop.report["result"]["eta"].as_array().unwrap();
        let oracle_eta = oracle.report["result"]["eta"].as_array().unwrap();
        assert_eq!(eta.len(), oracle_eta.len());
        for (a, b) in eta.iter().zip(oracle_eta) {
            assert_eq!(a["scenario"], b["scenario"]);
            let (a, b) = (a["value"].as_f64().unwrap(), b["value"].as_f64().unwrap());
            assert!((a - b).abs() <= 1e-9, "{name}: {a} vs {b}");
        }
    }
}
