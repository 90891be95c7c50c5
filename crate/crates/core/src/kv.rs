//! Plain-text `key = value` files shared by model files and experiment configs.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored; keys are
//! unique.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str, path: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: "empty key".into(),
            });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("expected a number, found `{value}`"),
    })
}

pub fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("expected a non-negative integer, found `{value}`"),
    })
}

pub fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("expected an unsigned 64-bit integer, found `{value}`"),
    })
}

/// Whitespace- or comma-separated list of numbers.
pub fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}
