//! Every malformed problem file must exit 2 with a machine-readable
//! error record that points at what is wrong.

use std::path::Path;
use std::process::Command;

fn run_fixture(name: &str) -> (i32, String) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    assert!(path.exists(), "missing fixture {name}");
    let out = Command::new(env!("CARGO_BIN_EXE_subrumin"))
        .args(["torus", "lambda1", "--problem"])
        .arg(&path)
        .env("SUBRUMIN_CALIBRATION", "/nonexistent/subrumin-cal.json")
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("stdout is utf-8"),
    )
}

#[test]
fn all_twenty_fixtures_exit_two_with_located_errors() {
    let fixtures = [
        "01_not_json.json",
        "02_top_level_array.json",
        "03_missing_geometry.json",
        "04_unknown_top_key.json",
        "05_bad_geometry_type.json",
        "06_geometry_unknown_key.json",
        "07_negative_k.json",
        "08_float_k.json",
        "09_bool_coefficient.json",
        "10_potential_unknown_key.json",
        "11_f_gauge_number.json",
        "12_bad_method.json",
        "13_grid_not_array.json",
        "14_negative_grid_entry.json",
        "15_grid_arity_mismatch.json",
        "16_tol_string.json",
        "17_tol_zero.json",
        "18_seed_float.json",
        "19_trailing_garbage.json",
        "20_unparsable_expression.json",
    ];
    assert_eq!(fixtures.len(), 20);
    for name in fixtures {
        let (code, stdout) = run_fixture(name);
        assert_eq!(code, 2, "{name}: expected exit 2, got {code}\n{stdout}");
        let v: serde_json::Value =
            serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{name}: bad JSON ({e})"));
        assert_eq!(v["error"]["code"], 2, "{name}");
        let msg = v["error"]["message"].as_str().unwrap_or_default();
        assert!(!msg.is_empty(), "{name}: empty message");
    }
}

#[test]
fn messages_locate_the_defect() {
    // Spot-check that the message carries position or field information,
    // not just a generic refusal.
    let (_, stdout) = run_fixture("05_bad_geometry_type.json");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let msg = v["error"]["message"].as_str().unwrap();
    assert!(msg.contains("line") && msg.contains("column"), "{msg}");
    assert!(msg.contains("torux"), "{msg}");

    let (_, stdout) = run_fixture("15_grid_arity_mismatch.json");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let msg = v["error"]["message"].as_str().unwrap();
    assert!(msg.contains("solver.grid"), "{msg}");

    let (_, stdout) = run_fixture("20_unparsable_expression.json");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let msg = v["error"]["message"].as_str().unwrap();
    assert!(msg.contains("potential.a"), "{msg}");
}
