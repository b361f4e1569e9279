//! Flat `key = value` text files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are case-sensitive (`N` and `D` are upper case by convention).

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: key `{key}` assigned more than once")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
}

/// An entry together with the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

/// Parsed assignments, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, Entry>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
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
            let (key, value) = content.split_once('=').ok_or_else(|| KvError::Malformed {
                line,
                text: raw.trim().to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(KvError::Malformed {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            if entries.contains_key(key) {
                return Err(KvError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }
        Ok(Self { entries })
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), KvError> {
        match self
            .entries
            .iter()
            .filter(|(k, _)| !allowed.contains(&k.as_str()))
            .min_by_key(|(_, e)| e.line)
        {
            Some((key, e)) => Err(KvError::UnknownKey {
                line: e.line,
                key: key.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, KvError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| KvError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    expected: "a real number",
                })
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64, KvError> {
        self.opt_f64(key)?.ok_or_else(|| missing(key))
    }

    /// Integers also accept scientific notation as long as the value is integral (`1e5`).
    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>, KvError> {
        self.raw(key)
            .map(|v| parse_count(v).ok_or_else(|| KvError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "a nonnegative integer",
            }))
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64, KvError> {
        self.opt_u64(key)?.ok_or_else(|| missing(key))
    }

    pub fn usize(&self, key: &str) -> Result<usize, KvError> {
        let v = self.u64(key)?;
        usize::try_from(v).map_err(|_| KvError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
            expected: "an index that fits in memory",
        })
    }
}

fn missing(key: &str) -> KvError {
    KvError::MissingKey {
        key: key.to_string(),
    }
}

/// Parses a nonnegative integer, accepting integral floating-point spellings like `1e5`.
pub fn parse_count(text: &str) -> Option<u64> {
    if let Ok(v) = text.parse::<u64>() {
        return Some(v);
    }
    let f = text.parse::<f64>().ok()?;
    // 2^53: beyond this, f64 no longer represents every integer
    if f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= 9_007_199_254_740_992.0 {
        Some(f as u64)
    } else {
        None
    }
}
