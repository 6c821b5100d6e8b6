//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    /// `(key, value, line number)` in file order; keys may repeat.
    entries: Vec<(String, String, usize)>,
    source: String,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{source}:{}: expected `key = value`",
                    i + 1
                )));
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(CliError::usage(format!("{source}:{}: empty key", i + 1)));
            }
            entries.push((key.to_string(), v.trim().to_string(), i + 1));
        }
        Ok(Self {
            entries,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    /// Every value given for `key`, in file order.
    pub fn all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
            .collect()
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                CliError::usage(format!("{}: bad value {v:?} for `{key}`: {e}", self.source))
            }),
        }
    }

    /// Rejects keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), CliError> {
        let known: BTreeSet<&str> = known.iter().copied().collect();
        match self
            .entries
            .iter()
            .find(|(k, _, _)| !known.contains(k.as_str()))
        {
            Some((k, _, line)) => Err(CliError::usage(format!(
                "{}:{line}: unknown key `{k}`",
                self.source
            ))),
            None => Ok(()),
        }
    }
}

/// Flag value if given, else the config value, else `default`.
pub fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => cfg.parsed(key)?.unwrap_or(default),
    })
}

/// Flag value if given, else the config value.
pub fn pick_opt<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => cfg.parsed(key)?,
    })
}

/// A boolean switch is on if the flag is present or the config says `true`.
pub fn pick_switch(flag: bool, cfg: &Config, key: &str) -> Result<bool, CliError> {
    Ok(flag || cfg.parsed::<bool>(key)?.unwrap_or(false))
}

/// Renders `key = value` lines.
pub fn render(header: &[String], entries: &[(String, String)]) -> String {
    let mut s = String::new();
    for h in header {
        s.push_str("# ");
        s.push_str(h);
        s.push('\n');
    }
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}
