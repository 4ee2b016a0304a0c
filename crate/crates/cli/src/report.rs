//! The header every report starts with: subcommand, inputs, the settings in
//! force and which of them were overridden on the command line.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use revspec::RevspecError;

use crate::input::UsageError;

pub struct Report {
    command: &'static str,
    inputs: Vec<String>,
    settings: BTreeMap<String, Value>,
    overrides: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, inputs: &[&str]) -> Self {
        Self { command, inputs: inputs.iter().map(|s| s.to_string()).collect(), settings: BTreeMap::new(), overrides: Vec::new() }
    }

    pub fn setting(&mut self, key: &str, value: impl Into<Value>) {
        self.settings.insert(key.to_string(), value.into());
    }

    /// A positive real setting, taken from the command line when given.
    pub fn positive(&mut self, key: &str, given: Option<f64>, default: f64) -> Result<f64, UsageError> {
        let v = match given {
            Some(v) if v.is_finite() && v > 0.0 => {
                self.overrides.push(key.to_string());
                v
            }
            Some(v) => return Err(UsageError(format!("--{key} must be positive, got {v}"))),
            None => default,
        };
        self.setting(key, v);
        Ok(v)
    }

    /// A grid size; grids coarser than 16 points are rejected.
    pub fn grid(&mut self, key: &str, given: Option<usize>, default: usize) -> Result<usize, UsageError> {
        let n = given.unwrap_or(default);
        if n < 16 {
            return Err(UsageError(format!("--{key} must be at least 16, got {n}")));
        }
        if given.is_some_and(|g| g != default) {
            self.overrides.push(key.to_string());
        }
        self.setting(key, n);
        Ok(n)
    }

    /// Records a flag that has a clap default, marking it overridden when it differs.
    pub fn flag(&mut self, key: &str, value: impl Into<Value>, default: impl Into<Value>) {
        let value = value.into();
        if value != default.into() {
            self.overrides.push(key.to_string());
        }
        self.setting(key, value);
    }

    fn header(&self, passed: bool) -> Map<String, Value> {
        let mut overrides = self.overrides.clone();
        overrides.sort();
        overrides.dedup();
        let mut map = Map::new();
        map.insert("command".into(), json!(self.command));
        map.insert("inputs".into(), json!(self.inputs));
        map.insert("settings".into(), Value::Object(self.settings.clone().into_iter().collect()));
        map.insert("overrides".into(), json!(overrides));
        map.insert("passed".into(), json!(passed));
        map
    }

    /// The full report: header fields with the result fields alongside.
    pub fn finish(&self, passed: bool, result: Value) -> Value {
        let mut map = self.header(passed);
        if let Value::Object(r) = result {
            for (k, v) in r {
                map.insert(k, v);
            }
        }
        Value::Object(map)
    }

    pub fn failure(&self, err: &RevspecError) -> Value {
        let mut map = self.header(false);
        map.insert("error".into(), error_value(err));
        Value::Object(map)
    }
}

pub fn error_value(err: &RevspecError) -> Value {
    json!({ "name": err.name(), "detail": err.to_string() })
}

/// The scalar part of a report, for CSV comment lines.
pub fn csv_header(doc: &Value) -> Value {
    let Value::Object(map) = doc else { return Value::Null };
    let keep = |k: &str, v: &Value| matches!(k, "settings" | "overrides" | "inputs" | "error") || !(v.is_array() || v.is_object());
    Value::Object(map.iter().filter(|(k, v)| keep(k, v)).map(|(k, v)| (k.clone(), v.clone())).collect())
}
