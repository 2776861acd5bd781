//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Lists use `,` between numbers
//! and `;` between points, e.g. `centers = 0,0; 3,0`.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

impl ConfigError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.trim().to_string(),
                });
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.trim().to_string(),
                });
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: idx + 1, key });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_known(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::Unknown(k.to_string())),
            None => Ok(()),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.f64(key),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self
            .get(key)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        let x: f64 = v
            .parse()
            .map_err(|_| ConfigError::invalid(key, format!("expected a number, got `{v}`")))?;
        if !x.is_finite() {
            return Err(ConfigError::invalid(key, "value must be finite"));
        }
        Ok(x)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError::invalid(key, format!("expected a non-negative integer, got `{v}`"))
            }),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError::invalid(key, format!("expected a non-negative integer, got `{v}`"))
            }),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(v) => Err(ConfigError::invalid(
                key,
                format!("expected true/false, got `{v}`"),
            )),
        }
    }

    /// Comma-separated list of numbers.
    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_numbers(key, v),
        }
    }

    /// `;`-separated points with `dim` (or `dim - 1`, padded with 0)
    /// comma-separated coordinates each.
    pub fn points(&self, key: &str, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
        let v = self
            .get(key)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        let mut out = Vec::new();
        for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let mut nums = parse_numbers(key, part)?;
            if nums.len() + 1 == dim {
                nums.push(0.0);
            }
            if nums.len() != dim {
                return Err(ConfigError::invalid(
                    key,
                    format!("point `{part}` must have {} or {dim} coordinates", dim - 1),
                ));
            }
            out.push(nums);
        }
        if out.is_empty() {
            return Err(ConfigError::invalid(key, "empty point list"));
        }
        Ok(out)
    }
}

fn parse_numbers(key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ConfigError::invalid(key, format!("expected a number, got `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_points() {
        let kv = KeyValues::parse(
            "# header\nh = 1.5\n\ncenters = 0,0; 3, 0 ,0  # two\neps_list=1e-2,2.5e-3\n",
        )
        .unwrap();
        assert_eq!(kv.f64("h").unwrap(), 1.5);
        assert_eq!(
            kv.points("centers", 3).unwrap(),
            vec![vec![0.0, 0.0, 0.0], vec![3.0, 0.0, 0.0]]
        );
        assert_eq!(kv.list_or("eps_list", &[]).unwrap(), vec![1e-2, 2.5e-3]);
        assert_eq!(kv.f64_or("alpha0", 0.0).unwrap(), 0.0);
    }

    #[test]
    fn errors_name_the_key() {
        let kv = KeyValues::parse("epsilon = abc").unwrap();
        let e = kv.f64("epsilon").unwrap_err();
        assert!(e.to_string().contains("epsilon"));
        assert_eq!(kv.f64("h").unwrap_err(), ConfigError::Missing("h".into()));
        assert!(matches!(
            KeyValues::parse("novalue"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KeyValues::parse("a=1\na=2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert_eq!(
            kv.check_known(&["h"]),
            Err(ConfigError::Unknown("epsilon".into()))
        );
    }
}
