//! Flat `key = value` parameters with `#` comments.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::LabError;

/// Parses `key = value` lines. Blank lines and `#` comments (whole-line or
/// trailing) are ignored; later duplicates win.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, LabError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_assignment(line).map_err(|message| LabError::ConfigSyntax { line: i + 1, message })?;
        out.insert(k, v);
    }
    Ok(out)
}

/// Parses one `key=value` assignment (as given to `--set`).
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected `key = value`, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return Err(format!("bad key `{k}`"));
    }
    Ok((k.to_owned(), v.to_owned()))
}

/// Resolved scenario parameters: declared defaults overlaid with file values
/// and `--set` overrides. Keys a scenario does not declare are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn resolve(
        scenario: &str,
        defaults: &[(&str, &str)],
        layers: &[&BTreeMap<String, String>],
    ) -> Result<Self, LabError> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect();
        for layer in layers {
            for (k, v) in layer.iter() {
                if !values.contains_key(k) {
                    return Err(LabError::UnknownKey { scenario: scenario.to_owned(), key: k.clone() });
                }
                values.insert(k.clone(), v.clone());
            }
        }
        Ok(Self { values })
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("parameter `{key}` not declared"))
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> LabError {
        LabError::BadValue { key: key.to_owned(), value: self.raw(key).to_owned(), message: message.into() }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, LabError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).parse().map_err(|e: T::Err| self.bad(key, e.to_string()))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, LabError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).trim();
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',').map(|s| s.trim().parse().map_err(|e: T::Err| self.bad(key, e.to_string()))).collect()
    }

    /// A 2-D point written `x,y`.
    pub fn point(&self, key: &str) -> Result<[f64; 2], LabError> {
        let v: Vec<f64> = self.list(key)?;
        <[f64; 2]>::try_from(v).map_err(|_| self.bad(key, "expected two comma-separated numbers"))
    }

    pub fn positive(&self, key: &str) -> Result<f64, LabError> {
        let v: f64 = self.get(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(key, "must be positive"))
        }
    }

    pub fn count(&self, key: &str) -> Result<usize, LabError> {
        let v: usize = self.get(key)?;
        if v > 0 {
            Ok(v)
        } else {
            Err(self.bad(key, "must be at least 1"))
        }
    }
}
