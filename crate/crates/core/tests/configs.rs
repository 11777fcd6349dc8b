use std::path::PathBuf;

use authorlm::train::RunConfig;
use serde_json::Value;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(configs_dir().join(name)).unwrap()
}

/// Walks the schema alongside the serialized defaults.
fn check_defaults(schema: &Value, actual: &Value, path: &str) {
    let props = schema["properties"].as_object().unwrap();
    let obj = actual.as_object().unwrap();
    for key in obj.keys() {
        assert!(props.contains_key(key), "{path}.{key} missing from schema");
    }
    for (key, sub) in props {
        let Some(value) = obj.get(key) else {
            continue;
        };
        if sub.get("properties").is_some() {
            check_defaults(sub, value, &format!("{path}.{key}"));
        } else if let Some(d) = sub.get("default") {
            assert_eq!(d, value, "default of {path}.{key}");
        }
    }
}

#[test]
fn schema_defaults_match_the_code() {
    let schema: Value = serde_json::from_str(&read("schema.json")).unwrap();
    let minimal = RunConfig::from_json(r#"{"corpora": {"author": "a.txt"}}"#).unwrap();
    let actual = serde_json::to_value(&minimal).unwrap();
    check_defaults(&schema, &actual, "");
}

#[test]
fn shipped_configs_parse() {
    for name in ["desk.json", "sample.json", "compare.json"] {
        RunConfig::from_json(&read(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let err = RunConfig::from_json(r#"{"corpora": {"author": "a"}, "train": {"epochs": 3}}"#)
        .unwrap_err();
    assert!(err.to_string().contains("epochs"));
}
