//! Config loading: defaults, then a JSON file, then `--key=value`
//! overrides. Unknown keys are rejected.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] spinsim::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => crate::EXIT_VERIFY,
            _ => crate::EXIT_CONFIG,
        }
    }
}

/// Splits `--key=value`. The value is read as JSON, falling back to a
/// plain string (so `--case=rf` works without quotes).
pub fn parse_override(arg: &str) -> Result<(String, Value), CliError> {
    let body = arg
        .strip_prefix("--")
        .ok_or_else(|| CliError::Config(format!("override {arg:?} must look like --key=value")))?;
    let (key, raw) = body
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {arg:?} must look like --key=value")))?;
    if key.is_empty() {
        return Err(CliError::Config(format!("override {arg:?} has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn as_object(v: Value, what: &str) -> Result<Map<String, Value>, CliError> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Config(format!("{what} must be a JSON object"))),
    }
}

/// Merges the file and overrides over `defaults` and deserializes the result.
pub fn load<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, overrides: &[String]) -> Result<T, CliError> {
    let base = serde_json::to_value(defaults).map_err(|e| CliError::Config(e.to_string()))?;
    let mut merged = as_object(base, "defaults")?;
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merged.extend(as_object(v, "config file")?);
    }
    for arg in overrides {
        let (k, v) = parse_override(arg)?;
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

/// SHA-256 of the config's JSON serialization, as lowercase hex.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let text = serde_json::to_string(cfg).expect("configs serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
