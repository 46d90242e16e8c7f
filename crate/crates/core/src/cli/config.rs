//! JSON config files whose keys mirror the long flag names.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use super::CliError;

#[derive(Debug, Default)]
pub struct Config {
    values: Map<String, Value>,
    path: Option<PathBuf>,
}

impl Config {
    /// Reads `path` if given; keys outside `allowed` are rejected.
    pub fn load(path: Option<&Path>, allowed: &[String]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let Value::Object(values) = value else {
            return Err(CliError::Usage(format!("config {} must be a JSON object", path.display())));
        };
        if let Some(key) = values.keys().find(|k| !allowed.contains(k)) {
            return Err(CliError::Usage(format!(
                "config {}: unknown key \"{key}\"",
                path.display()
            )));
        }
        Ok(Self {
            values,
            path: Some(path.to_path_buf()),
        })
    }

    /// The flag value if set, otherwise the config value under `key`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| {
                let file = self.path.as_deref().unwrap_or(Path::new("config"));
                CliError::Usage(format!("config {}: key \"{key}\": {e}", file.display()))
            }),
        }
    }

    pub fn pick_or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        self.pick(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}")))
    }
}
