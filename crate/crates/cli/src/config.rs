//! JSON config files overlaid by command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub fn read_config(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::input("config must be a JSON object")),
        Err(e) => Err(CliError::input(format!("config {}: {e}", path.display()))),
    }
}

/// Flags that were given replace the matching keys of the config file.
/// Flag structs skip unset options when serialised.
pub fn overlay<F: Serialize>(mut base: Map<String, Value>, flags: &F) -> CliResult<Map<String, Value>> {
    let Value::Object(set) = serde_json::to_value(flags).map_err(|e| CliError::input(e.to_string()))? else {
        unreachable!("flag structs serialise to objects")
    };
    base.extend(set);
    Ok(base)
}

pub fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> CliResult<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| CliError::input(format!("config key '{key}': {e}"))),
    }
}

/// Deserialises whatever keys remain; unknown keys are rejected by the target.
pub fn finish<T: DeserializeOwned>(map: Map<String, Value>) -> CliResult<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::input(e.to_string()))
}

/// Reads the config file (if any), overlays the given flags and parses
/// the result back into the flag struct.
pub fn resolve<F: Serialize + DeserializeOwned>(flags: &F, config: Option<&Path>) -> CliResult<F> {
    finish(overlay(read_config(config)?, flags)?)
}
