//! End-to-end tests against the compiled binary: scenario results, output
//! formats, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn mphys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mphys"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(args: &[&str]) -> serde_json::Value {
    let out = mphys(args);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

fn scalar(v: &serde_json::Value, key: &str) -> f64 {
    v["outputs"][key].as_f64().unwrap_or_else(|| panic!("scalar output '{key}'"))
}

#[test]
fn heat_matches_the_decaying_mode() {
    let v = stdout_json(&["heat", "--dim", "1", "--N", "256", "--D", "1", "--t", "1"]);
    assert_eq!(v["name"], "heat");
    assert!(scalar(&v, "error") <= 1e-12);
    assert_eq!(v["pass"], serde_json::Value::Bool(true));
    assert_eq!(v["inputs"]["N"], "256");
    assert!(v["runtime_ms"].as_u64().is_some());
}

#[test]
fn lorenz_labels_the_origin_stable_below_threshold() {
    let v = stdout_json(&["lorenz", "--sigma", "10", "--b", "1.6", "--r", "0.5"]);
    assert_eq!(scalar(&v, "stable"), 1.0);
    assert_eq!(scalar(&v, "unstable"), 0.0);
    assert_eq!(v["pass"], serde_json::Value::Null);
}

#[test]
fn unknown_scenario_exits_2_and_lists_the_registry() {
    let out = mphys(&["advection"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("advection"));
    for name in ["heat", "maxwell", "bifurcation"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn malformed_flags_exit_2_naming_the_flag() {
    for (args, flag) in [
        (vec!["heat", "--D", "soup"], "--D"),
        (vec!["heat", "--banana", "1"], "--banana"),
        (vec!["wave", "--t"], "--t"),
        (vec!["bands", "--format", "yaml"], "--format"),
    ] {
        let out = mphys(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(flag), "{args:?} -> {err}");
    }
}

#[test]
fn randomized_scenarios_require_a_seed() {
    for name in ["schroedinger", "maxwell", "minmax", "helmholtz", "gl-descent"] {
        let out = mphys(&[name]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"), "{name}");
    }
}

/// Every number in the emitted JSON must survive a parse round trip
/// bit-for-bit; 17 significant digits guarantee that for f64.
#[test]
fn json_numbers_round_trip_exactly() {
    let out = mphys(&["wave", "--samples", "33"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();

    let mut checked = 0;
    for token in text.split(|c: char| "[]{},:\"\n".contains(c)) {
        let numeric = token.starts_with('-') || token.starts_with(|c: char| c.is_ascii_digit());
        if !numeric || !token.contains('e') {
            continue;
        }
        let value: f64 = token.parse().unwrap_or_else(|_| panic!("token '{token}'"));
        assert_eq!(format!("{value:.16e}"), token, "reprint changed the number");
        checked += 1;
    }
    // Two 33-point arrays plus three scalars.
    assert_eq!(checked, 69, "unexpected numeric token count {checked}");
}

/// Identical flags and seed give identical output. The runtime_ms field is
/// wall-clock and is masked here; every other byte must match.
#[test]
fn same_flags_and_seed_reproduce_the_json() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> String {
        let path = dir.path().join(name);
        let out = mphys(&["maxwell", "--seed", "5", "--N", "8", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
        let text = std::fs::read_to_string(&path).unwrap();
        let start = text.find("\"runtime_ms\":").expect("runtime field present");
        let end = text[start..].find('}').unwrap() + start;
        format!("{}{}", &text[..start], &text[end..])
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn bands_csv_carries_the_declared_header() {
    let out = mphys(&["bands", "--nk", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k1,k2,E_minus,E_plus"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let fields: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields.len(), 4);
        assert!(fields[2] <= fields[3], "bands out of order: {row}");
    }
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn unwritable_out_path_exits_1_with_an_io_error() {
    let missing = Path::new("/nonexistent-dir-for-this-test/out.json");
    let out = mphys(&["heat", "--out", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
}

#[test]
fn failed_tolerance_reports_pass_false_and_exits_1() {
    // Far outside the weak-coupling regime the asymptotic is off by more
    // than 10%, so the scenario honestly reports failure.
    let out = mphys(&["birman-schwinger", "--lambda", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], serde_json::Value::Bool(false));
}

#[test]
fn seeded_scenarios_change_with_the_seed() {
    let a = stdout_json(&["minmax", "--seed", "1"]);
    let b = stdout_json(&["minmax", "--seed", "2"]);
    assert_ne!(scalar(&a, "ground_energy"), scalar(&b, "ground_energy"));
    assert_eq!(a["inputs"]["seed"], "1");
}

#[test]
fn help_exits_0_with_the_grammar() {
    let out = mphys(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("usage: mphys <scenario>"));
}
