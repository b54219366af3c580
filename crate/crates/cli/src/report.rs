//! Report files: `<name>.txt` holds one `key = value` line per scalar,
//! `<name>.json` mirrors the same tree.
//!
//! Keys are dotted paths into the JSON tree; array elements use their index
//! as the path segment. Numbers use the shortest representation that
//! round-trips, non-finite numbers appear as `null`, strings are written
//! bare.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn flatten(value: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    walk(value, String::new(), &mut out);
    out
}

fn walk(value: &Value, key: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if key.is_empty() {
            k.to_string()
        } else {
            format!("{key}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                walk(v, join(k), out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                walk(v, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push((key, s.clone())),
        other => out.push((key, other.to_string())),
    }
}

pub fn to_text(title: &str, value: &Value) -> String {
    let mut out = format!("# {title}\n");
    for (k, v) in flatten(value) {
        out.push_str(&k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize to JSON")
}

/// Write `<name>.txt` and `<name>.json` into `dir`.
pub fn write_report(dir: &Path, name: &str, value: &Value) -> std::io::Result<()> {
    std::fs::write(
        dir.join(format!("{name}.txt")),
        to_text(&format!("mpsolve {name} report"), value),
    )?;
    let mut json = serde_json::to_string_pretty(value).expect("JSON values serialize");
    json.push('\n');
    std::fs::write(dir.join(format!("{name}.json")), json)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run record: config hash, command, exit code, verdicts and whatever
/// constants the command computed.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub exit_code: i32,
    pub verdicts: Map<String, Value>,
    pub constants: Option<Value>,
    pub message: Option<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(dir.join(format!("{}.manifest.json", self.command)), json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_values_flatten_to_dotted_keys() {
        let v = json!({"a": {"b": 1.5, "c": [true, "x"]}, "d": null});
        let flat = flatten(&v);
        assert_eq!(
            flat,
            vec![
                ("a.b".into(), "1.5".into()),
                ("a.c.0".into(), "true".into()),
                ("a.c.1".into(), "x".into()),
                ("d".into(), "null".into()),
            ]
        );
        assert_eq!(to_text("t", &json!({"k": 2})), "# t\nk = 2\n");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
