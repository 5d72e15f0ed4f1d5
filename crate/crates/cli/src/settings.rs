//! Layered configuration: built-in defaults, then a `key=value` file, then flags.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const KEYS: &[&str] = &[
    "n", "query", "mech", "b", "D", "L", "grid", "eps", "seed", "restarts", "jobs", "strict", "bits",
    "extended", "zigzag",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let values = pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self { values }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).ok_or_else(|| anyhow!("missing setting {key}"))?;
        raw.parse().map_err(|e| anyhow!("bad value {raw:?} for {key}: {e}"))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => v.parse().map_err(|_| anyhow!("{key} must be true or false, got {v:?}")),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).ok_or_else(|| anyhow!("missing setting {key}"))?;
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|e| anyhow!("bad item {s:?} in {key}: {e}")))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn parse_config(text: &str) -> Result<Settings> {
    let mut s = Settings::default();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", no + 1))?;
        let k = k.trim().trim_start_matches("--");
        if !KEYS.contains(&k) {
            bail!("config line {}: unknown key {k:?}", no + 1);
        }
        s.set(k, v.trim());
    }
    Ok(s)
}

pub fn read_config(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text)
}

/// A number, `max`, or `<factor>*max`, where `max` is resolved per problem.
fn grid_value(token: &str, max: f64) -> Result<f64> {
    let t = token.trim();
    if t == "max" {
        return Ok(max);
    }
    if let Some(f) = t.strip_suffix("*max") {
        return Ok(f.trim().parse::<f64>().map_err(|_| anyhow!("bad grid factor {f:?}"))? * max);
    }
    t.parse().map_err(|_| anyhow!("bad grid value {t:?}"))
}

/// `lo:hi:count` (inclusive, evenly spaced) or a comma-separated list.
pub fn parse_grid(spec: &str, max: f64) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, count] => {
            let lo = grid_value(lo, max)?;
            let hi = grid_value(hi, max)?;
            let count: usize = count.trim().parse().map_err(|_| anyhow!("bad grid count {count:?}"))?;
            match count {
                0 => bail!("grid needs at least one point"),
                1 => Ok(vec![lo]),
                _ => Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()),
            }
        }
        [_] => spec.split(',').map(|t| grid_value(t, max)).collect(),
        _ => bail!("grid {spec:?} must be lo:hi:count or a comma-separated list"),
    }
}
