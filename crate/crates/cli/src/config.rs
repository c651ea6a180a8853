//! `key = value` configuration files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Parsed config file. Keys use the long flag names without the leading
/// dashes (`burn-in`, `aux-iters`, ...); `_` and `-` are interchangeable.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: String,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                bail!("{source}:{}: expected `key = value`", no + 1);
            };
            let key = normalize(k);
            if key.is_empty() {
                bail!("{source}:{}: empty key", no + 1);
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                bail!("{source}:{}: `{key}` set twice", no + 1);
            }
        }
        Ok(ConfigFile {
            values,
            source: source.to_string(),
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("{}: bad value `{v}` for `{key}`: {e}", self.source)),
        }
    }

    /// Keys not in `known`, reported so typos do not pass silently.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect()
    }
}

/// Flag value if given, then config file, then `default`.
pub fn pick<T>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    Ok(match flag {
        Some(v) => v,
        None => cfg.get(key)?.unwrap_or(default),
    })
}

/// As [`pick`] without a default.
pub fn pick_opt<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// Comma-separated list, e.g. `700,700,700`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T> FromStr for List<T>
where
    T: FromStr,
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<T>()
                    .map_err(|e| format!("`{}`: {e}", p.trim()))
            })
            .collect::<std::result::Result<Vec<T>, String>>()
            .map(List)
    }
}

/// Expands a per-model list: one value is broadcast, otherwise the length
/// must match the number of models.
pub fn per_model<T: Clone>(
    list: Option<List<T>>,
    k: usize,
    default: T,
    name: &str,
) -> Result<Vec<T>> {
    match list {
        None => Ok(vec![default; k]),
        Some(List(v)) if v.len() == 1 => Ok(vec![v[0].clone(); k]),
        Some(List(v)) if v.len() == k => Ok(v),
        Some(List(v)) => bail!("--{name} has {} values for {k} models", v.len()),
    }
}
