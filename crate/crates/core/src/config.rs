//! Flat `key = value` configuration files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key is an error.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(path, i + 1, "empty key"));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::parse(path, i + 1, format!("repeated key `{key}`")));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl TrainConfig {
    /// Defaults overridden by every key of the file at `path`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::default();
        for (key, value) in parse_key_values(&fs::read_to_string(path)?, path)? {
            config.set(&key, &value)?;
        }
        Ok(config)
    }
}
