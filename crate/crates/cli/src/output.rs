//! Result serialization. Every float in the emitted JSON is rounded to
//! 12 significant digits so identical runs produce identical bytes; the
//! only field allowed to differ between reruns is runtime_ms.

use serde_json::{Map, Value};

/// Round every float in the tree to 12 significant digits. Integers pass
/// through untouched; non-finite values become null.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                return;
            }
            let f = n.as_f64().unwrap_or(f64::NAN);
            *v = number(f);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn number(f: f64) -> Value {
    if !f.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{f:.11e}").parse().expect("formatted float reparses");
    serde_json::Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

/// Assemble the result record: the subcommand's own fields first, then
/// the trailer every record carries (runtime, version, seed, echoed
/// config).
pub fn record(
    body: Vec<(&str, Value)>,
    runtime_ms: u128,
    seed: u64,
    config: Option<Value>,
) -> Value {
    let mut map = Map::new();
    for (k, v) in body {
        map.insert(k.to_string(), v);
    }
    map.insert("runtime_ms".into(), Value::from(runtime_ms as u64));
    map.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    map.insert("seed".into(), Value::from(seed));
    if let Some(c) = config {
        map.insert("config".into(), c);
    }
    let mut v = Value::Object(map);
    round_floats(&mut v);
    v
}

pub fn print_record(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("record serializes"));
}

/// Comma-separated, header row, '.' decimal. Cells that do not apply
/// stay empty.
pub fn write_csv(path: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), String> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("{path}: {e}"))
}

pub fn csv_float(f: f64) -> String {
    format!("{f:.12e}")
}
