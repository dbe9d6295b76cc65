use std::process::{Command, Output};

use qrframe::cli::{
    emit_report, exit, load, preset, run_scenario, Format, RunReport, ScenarioConfig, PRESETS,
};
use qrframe::Error;

fn qrframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrframe"))
        .args(args)
        .output()
        .expect("binary runs")
}

const DEGENERATE: &str = r#"
version = 1
name = "no-physical-component"
sites = 3
checks = ["probability-preservation"]
particles = [{ label = "A" }, { label = "B" }, { label = "C", internal_dim = 2 }]

[state]
kind = "product"
modes = [
  { mode = "A", index = 1 },
  { mode = "B", index = 0 },
  { mode = "C:ext", index = 0 },
  { mode = "C:int", index = 0 },
]

[[unitary]]
recipe = "identity"

[measurement]
pointer = "C:int"
perspectives = ["C", "A"]
"#;

#[test]
fn json_report_round_trips() {
    let report = run_scenario(&preset("apparatus-frame").unwrap()).unwrap();
    let text = report.to_json();
    assert_eq!(RunReport::from_json(&text).unwrap(), report);
}

#[test]
fn csv_has_one_row_per_outcome() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "apparatus-frame",
        "von-neumann-momentum-pointer",
        "small-l2-n4",
    ] {
        let report = run_scenario(&preset(name).unwrap()).unwrap();
        let files = emit_report(&report, Format::Csv, dir.path()).unwrap();
        let table = std::fs::read_to_string(&files[0]).unwrap();
        let outcomes = report.perspectives[0].probabilities.len();
        assert_eq!(table.lines().count(), outcomes + 1, "{name}");
        let header = table.lines().next().unwrap();
        assert!(header.starts_with("outcome,rho_"), "{header}");
        assert!(header.contains("abs_delta"));
        let checks = std::fs::read_to_string(&files[1]).unwrap();
        assert_eq!(checks.lines().count(), report.checks.len() + 1);
    }
}

#[test]
fn every_requested_check_appears_once() {
    for (name, _) in PRESETS {
        let cfg = preset(name).unwrap();
        let report = run_scenario(&cfg).unwrap();
        let names: Vec<_> = report.checks.iter().map(|c| c.name.as_str()).collect();
        let wanted: Vec<_> = cfg.checks.iter().map(|c| c.name()).collect();
        assert_eq!(names, wanted, "{name}");
        for p in &report.perspectives {
            assert!(
                (p.probability_sum - 1.0).abs() < 1e-10,
                "{name}: {}",
                p.reference
            );
        }
    }
}

#[test]
fn identity_preset_leaves_the_pointer_ready() {
    let report = run_scenario(&preset("identity").unwrap()).unwrap();
    for p in &report.perspectives {
        assert!((p.probabilities[0] - 1.0).abs() < 1e-12);
        assert!(p.probabilities[1..].iter().all(|x| x.abs() < 1e-12));
    }
    assert!(report.passed());
}

#[test]
fn invalid_config_lists_every_problem_and_exits_2() {
    let text = r#"
version = 1
name = "broken"
sites = 1
checks = ["order-swap"]
particles = [{ label = "A" }, { label = "A" }]

[state]
kind = "random"

[[unitary]]
recipe = "identity"

[measurement]
pointer = "Z:int"
perspectives = ["Q"]
"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, text).unwrap();
    let out = qrframe(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::CONFIG as i32));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lattice size"), "{err}");
    assert!(err.contains("`A`"), "{err}");

    let cfg = load(path.to_str().unwrap()).unwrap();
    match cfg.validate() {
        Err(Error::Config(problems)) => assert!(problems.len() >= 2, "{problems:?}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = preset_text("identity").replace("sites = 3", "sites = 3\ncolour = \"blue\"");
    assert!(matches!(
        ScenarioConfig::from_toml(&text),
        Err(Error::Config(_))
    ));
}

#[test]
fn missing_file_and_unknown_preset_exit_2() {
    assert_eq!(
        qrframe(&["run", "/nonexistent/x.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(qrframe(&["run", "preset:nope"]).status.code(), Some(2));
}

#[test]
fn degenerate_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("degenerate.toml");
    std::fs::write(&path, DEGENERATE).unwrap();
    let out = qrframe(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::DEGENERATE as i32));
    let report = RunReport::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report.degenerate);
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let out = qrframe(&["run", "preset:identity", "--tolerance", "1e-300"]);
    assert_eq!(out.status.code(), Some(exit::CHECK_FAILED as i32));
}

#[test]
fn presets_verb_lists_every_preset() {
    let out = qrframe(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for (name, _) in PRESETS {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn seed_changes_the_provenance_and_the_digest() {
    let a = qrframe(&["run", "preset:random-invariant", "--seed", "1"]);
    let b = qrframe(&["run", "preset:random-invariant", "--seed", "2"]);
    let ra = RunReport::from_json(&String::from_utf8_lossy(&a.stdout)).unwrap();
    let rb = RunReport::from_json(&String::from_utf8_lossy(&b.stdout)).unwrap();
    assert_eq!(ra.provenance.seed, Some(1));
    assert_ne!(ra.provenance.config_sha256, rb.provenance.config_sha256);
    assert_ne!(ra.perspectives, rb.perspectives);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let out = qrframe(&["run", "preset:identity", "--output", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::CONFIG as i32));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plain-file"));
}

fn preset_text(name: &str) -> String {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap()
        .1
        .to_string()
}
