//! Flat `section.key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are skipped. Every key must be
//! declared by the task being run; anything else is rejected with its line
//! number.

use std::collections::BTreeMap;
use std::fmt;

use hjhom::numerics::MAX_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {line_no}: expected `key = value`"));
            };
            let key = k.trim();
            if key.is_empty() || !key.contains('.') || key.contains(char::is_whitespace) {
                return err(format!("line {line_no}: malformed key `{key}`"));
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (v.trim().to_string(), line_no)) {
                return err(format!("duplicate key `{key}` on lines {first} and {line_no}"));
            }
        }
        Ok(RawConfig { entries })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Default {
    Required,
    Optional,
    Value(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Default,
}

pub const fn key(name: &'static str, value: &'static str) -> Key {
    Key {
        name,
        default: Default::Value(value),
    }
}

pub const fn optional(name: &'static str) -> Key {
    Key {
        name,
        default: Default::Optional,
    }
}

pub const fn required(name: &'static str) -> Key {
    Key {
        name,
        default: Default::Required,
    }
}

/// Values for every declared key, defaults filled in.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(raw: &RawConfig, keys: &[Key]) -> Result<Self, ConfigError> {
        for (k, (_, line)) in &raw.entries {
            if !keys.iter().any(|d| d.name == k) {
                return err(format!("unknown key `{k}` on line {line}"));
            }
        }
        let mut values = BTreeMap::new();
        for d in keys {
            match (raw.entries.get(d.name), d.default) {
                (Some((v, _)), _) => {
                    values.insert(d.name.to_string(), v.clone());
                }
                (None, Default::Value(v)) => {
                    values.insert(d.name.to_string(), v.to_string());
                }
                (None, Default::Required) => return err(format!("missing required key `{}`", d.name)),
                (None, Default::Optional) => {}
            }
        }
        Ok(Settings { values })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        match self.values.get(key) {
            Some(v) => Ok(v),
            None => err(format!("missing key `{key}`")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.str(key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => err(format!("`{key}`: expected a finite number, got `{v}`")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.str(key)?;
        v.parse().or_else(|_| err(format!("`{key}`: expected a non-negative integer, got `{v}`")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.str(key)?;
        let out = split_list(v, ',')
            .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>();
        match out {
            Some(xs) if !xs.is_empty() => Ok(xs),
            _ => err(format!("`{key}`: expected comma-separated numbers, got `{v}`")),
        }
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>, ConfigError> {
        let v = self.str(key)?;
        match split_list(v, ',').map(|s| s.parse::<u64>().ok()).collect::<Option<Vec<_>>>() {
            Some(xs) if !xs.is_empty() => Ok(xs),
            _ => err(format!("`{key}`: expected comma-separated seeds, got `{v}`")),
        }
    }

    /// One point, `x` or `x,y`.
    pub fn point(&self, key: &str, dim: usize) -> Result<[f64; MAX_DIM], ConfigError> {
        parse_point(self.str(key)?, dim).map_err(|e| ConfigError(format!("`{key}`: {e}")))
    }

    /// Points separated by `;`.
    pub fn points(&self, key: &str, dim: usize) -> Result<Vec<[f64; MAX_DIM]>, ConfigError> {
        let v = self.str(key)?;
        let pts = split_list(v, ';')
            .map(|s| parse_point(s, dim))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError(format!("`{key}`: {e}")))?;
        if pts.is_empty() {
            return err(format!("`{key}`: expected at least one point"));
        }
        Ok(pts)
    }
}

fn split_list(v: &str, sep: char) -> impl Iterator<Item = &str> {
    v.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_point(s: &str, dim: usize) -> Result<[f64; MAX_DIM], String> {
    let xs: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| format!("bad point `{s}`"))?;
    if xs.len() != dim {
        return Err(format!("point `{s}` needs {dim} coordinate(s)"));
    }
    let mut p = [0.0; MAX_DIM];
    p[..dim].copy_from_slice(&xs);
    Ok(p)
}
