//! Output schema: file names, CSV header lines and JSON keys of every
//! built-in scenario, run at reduced size, against `golden/schema.txt`.
//!
//! Regenerate with `UPDATE_GOLDEN=1 cargo test --test outputs`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use casimir_gradiometer::scenario::{self, Experiment, RunOptions, BUILTINS};

const GOLDEN: &str = "tests/golden/schema.txt";

fn shrink(spec: &mut scenario::ScenarioSpec) {
    // the shortest durations the sweep and gradient analyses accept
    spec.base.duration = match spec.experiment {
        Experiment::GradientResponse => 2.0,
        _ => 0.4,
    };
    match &mut spec.experiment {
        Experiment::Bode { points, .. }
        | Experiment::DelaySweep { points, .. }
        | Experiment::SeparationSweep { points, .. }
        | Experiment::Fit { points, .. }
        | Experiment::PotentialCurve { points, .. } => *points = (*points).min(5),
        Experiment::TimeDomain { delays } => delays.truncate(2),
        Experiment::GradientResponse | Experiment::Resolution { .. } => {}
    }
}

fn json_keys(path: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    match v {
        serde_json::Value::Object(m) => m.keys().cloned().collect::<Vec<_>>().join(","),
        other => format!("<{}>", if other.is_array() { "array" } else { "scalar" }),
    }
}

fn schema() -> String {
    let mut out = String::new();
    for name in BUILTINS {
        let mut spec = scenario::builtin(name).unwrap();
        shrink(&mut spec);
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            plots: true,
        };
        scenario::run_scenario(&spec, &opts).unwrap();

        let mut files: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        let _ = writeln!(out, "[{name}]");
        for f in &files {
            let path = dir.path().join(f);
            let detail = match Path::new(f).extension().and_then(|e| e.to_str()) {
                Some("csv") => fs::read_to_string(&path)
                    .unwrap()
                    .lines()
                    .next()
                    .unwrap_or("")
                    .to_string(),
                Some("json") => json_keys(&path),
                Some("svg") => {
                    let svg = fs::read_to_string(&path).unwrap();
                    assert!(
                        svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"),
                        "{f}"
                    );
                    "svg".into()
                }
                _ => "?".into(),
            };
            let _ = writeln!(out, "{f}: {detail}");
        }
    }
    out
}

#[test]
fn output_schema_matches_golden() {
    let got = schema();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(GOLDEN, &got).unwrap();
        return;
    }
    let want = fs::read_to_string(GOLDEN).expect("golden schema missing; run with UPDATE_GOLDEN=1");
    for (i, (g, w)) in got.lines().zip(want.lines()).enumerate() {
        assert_eq!(g, w, "schema line {}", i + 1);
    }
    assert_eq!(got.lines().count(), want.lines().count(), "schema length");
}

#[test]
fn cli_exit_codes() {
    let sim = env!("CARGO_BIN_EXE_sim");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        std::process::Command::new(sim)
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
    };
    assert_eq!(run(&["fig3"]).status.code(), Some(0));
    let missing = run(&["no-such-scenario"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("fig5c"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "name = bad\ntau2f = 150\n").unwrap();
    let out = run(&[bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing unit"));
}
