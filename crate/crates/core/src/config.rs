//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key must be known to the
//! consumer; a key given twice is an error.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_kv(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`",
                i + 1
            )));
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn read_kv_file(path: impl AsRef<Path>) -> Result<Vec<Entry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text)
}

pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

/// Parses `"a:b"` or `"a,b"` into a pair.
pub fn parse_pair<T: std::str::FromStr>(key: &str, value: &str) -> Result<(T, T)> {
    let (a, b) = value
        .split_once(':')
        .or_else(|| value.split_once(','))
        .ok_or_else(|| {
            Error::Config(format!("`{key}` expects a pair like `1:10`, got {value:?}"))
        })?;
    Ok((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
}

/// Something configurable through flat keys.
pub trait KeyValue {
    /// Applies one key; `Ok(false)` when the key is not recognized.
    fn set(&mut self, key: &str, value: &str) -> Result<bool>;

    /// All keys with their current values, in a stable order.
    fn entries(&self) -> Vec<(&'static str, String)>;
}
