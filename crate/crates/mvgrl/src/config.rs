//! Training configuration files.
//!
//! Keys are the field names of [`TrainConfig`]. Two syntaxes are accepted:
//! a JSON object, or `key = value` lines with `#` comments. In the line
//! syntax a value is read as JSON when it parses as JSON, as a list of
//! strings when it contains commas, and as a bare string otherwise. A
//! scalar given for a list-valued key becomes a one-element list.

use std::fmt;
use std::path::Path;

use mvgrl_core::training::TrainConfig;
use serde_json::{Map, Value};
use thiserror::Error;

/// One problem with one configuration key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigProblem {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Syntax { path: std::path::PathBuf, line: usize, message: String },
    #[error("invalid configuration:\n{}", list(.0))]
    Invalid(Vec<ConfigProblem>),
}

fn list(problems: &[ConfigProblem]) -> String {
    problems.iter().map(|p| format!("  - {p}")).collect::<Vec<_>>().join("\n")
}

/// Ordered key/value assignments, later entries overriding earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignments(pub Vec<(String, Value)>);

impl Assignments {
    pub fn set(&mut self, key: &str, value: Value) {
        self.0.push((key.to_owned(), value));
    }

    pub fn extend(&mut self, other: Assignments) {
        self.0.extend(other.0);
    }
}

/// Reads a value given on a command line or a `key = value` line.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(
            raw.split(',')
                .map(|s| Value::String(s.trim().to_owned()))
                .collect(),
        );
    }
    Value::String(raw.to_owned())
}

/// Parses either syntax from text; `path` is used in messages only.
pub fn parse_text(text: &str, path: &Path) -> Result<Assignments, ConfigError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let map: Map<String, Value> = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok(Assignments(map.into_iter().collect()));
    }
    let mut out = Assignments::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        out.set(key.trim(), parse_value(value));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Assignments, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_text(&text, path)
}

/// Applies assignments over the defaults and validates the result,
/// reporting every unknown key, ill-typed value and violated constraint.
pub fn build(assignments: &Assignments) -> Result<TrainConfig, ConfigError> {
    let defaults = match serde_json::to_value(TrainConfig::default()).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("config serializes to an object"),
    };
    let mut merged = defaults.clone();
    let mut problems = Vec::new();
    for (key, value) in &assignments.0 {
        let Some(default) = defaults.get(key) else {
            problems.push(ConfigProblem {
                key: key.clone(),
                message: "unknown key".into(),
            });
            continue;
        };
        let value = if default.is_array() && !value.is_array() {
            Value::Array(vec![value.clone()])
        } else {
            value.clone()
        };
        let mut trial = merged.clone();
        trial.insert(key.clone(), value.clone());
        match serde_json::from_value::<TrainConfig>(Value::Object(trial)) {
            Ok(_) => {
                merged.insert(key.clone(), value);
            }
            Err(e) => problems.push(ConfigProblem {
                key: key.clone(),
                message: format!("invalid value {value}: {e}"),
            }),
        }
    }
    let config: TrainConfig = serde_json::from_value(Value::Object(merged)).expect("every accepted key was checked");
    problems.extend(config.validate().into_iter().map(|issue| ConfigProblem {
        key: issue.field.to_owned(),
        message: issue.message,
    }));
    if problems.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(problems))
    }
}

/// The configuration as `key = value` lines, sorted by key.
pub fn to_text(config: &TrainConfig) -> String {
    let Value::Object(map) = serde_json::to_value(config).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    map.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
