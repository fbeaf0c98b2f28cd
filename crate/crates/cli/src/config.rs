use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::fmt;
use std::path::Path;

/// Invalid configuration. Always names the offending key; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.into(), message: message.into() }
}

/// Small helpers for `validate` implementations.
pub fn require(ok: bool, key: &str, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(bad(key, message))
    }
}

pub fn load_file(path: &Path) -> Result<Map<String, Value>, ConfigError> {
    let key = "--config";
    let text = std::fs::read_to_string(path).map_err(|e| bad(key, format!("cannot read {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(bad(key, format!("{} is empty", path.display())));
    }
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(bad(key, "top level must be a JSON object")),
        Err(e) => Err(bad(key, format!("{} is not valid JSON: {e}", path.display()))),
    }
}

/// Inserts `value` at a dotted path, creating intermediate objects.
pub fn set_path(map: &mut Map<String, Value>, dotted: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts = dotted.split('.').peekable();
    let mut cur = map;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let slot = cur.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        cur = slot.as_object_mut().ok_or_else(|| bad(part, "expected an object"))?;
    }
    Ok(())
}

/// Overlays every non-null field of a flag struct. Field names may be dotted
/// paths into nested config sections.
pub fn overlay<F: Serialize>(map: &mut Map<String, Value>, flags: &F) -> Result<(), ConfigError> {
    if let Value::Object(fields) = serde_json::to_value(flags).map_err(|e| bad("flags", e.to_string()))? {
        for (k, v) in fields {
            if !v.is_null() {
                set_path(map, &k, v)?;
            }
        }
    }
    Ok(())
}

/// Deserializes with the failing path in the diagnostic.
pub fn parse<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        // unknown fields already appear in the path; missing ones do not
        let key = match inner.strip_prefix("missing field `").and_then(|s| s.split('`').next()) {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        bad(&key, inner)
    })
}
