//! Flat `key = value` configuration files. Blank lines and lines starting
//! with `#` are ignored. Command-line flags override file values, which
//! override built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parse(path: &Path, text: &str, allowed: &[&str]) -> Result<Self> {
        let err = |line: usize, detail: String| CliError::Config {
            path: path.to_path_buf(),
            detail: format!("line {line}: {detail}"),
        };
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(err(
                    i + 1,
                    format!("unknown key {k:?} (allowed: {})", allowed.join(", ")),
                ));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(err(i + 1, format!("duplicate key {k:?}")));
            }
        }
        Ok(Config {
            path: path.to_path_buf(),
            values,
        })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(path, &text, allowed)
    }

    /// Loads `path` if given, else an empty config.
    pub fn load_opt(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        path.map_or_else(|| Ok(Self::empty()), |p| Self::load(p, allowed))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| CliError::Config {
                    path: self.path.clone(),
                    detail: format!("{key} = {v:?}: {e}"),
                })
            })
            .transpose()
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    /// Like [`Config::pick`] without a default.
    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }
}

/// Comma-separated list, e.g. `2,2,2,0`.
pub fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["L", "R", "seed"];

    #[test]
    fn precedence() {
        let c = Config::parse(Path::new("c"), "# comment\nL = 4\n\nseed=9\n", KEYS).unwrap();
        assert_eq!(c.pick(Some(2usize), "L", 1).unwrap(), 2);
        assert_eq!(c.pick(None, "L", 1usize).unwrap(), 4);
        assert_eq!(c.pick(None, "R", 5usize).unwrap(), 5);
        assert_eq!(c.pick_opt::<u64>(None, "seed").unwrap(), Some(9));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let e = Config::parse(Path::new("c"), "L = 1\nsigma = 2\n", KEYS).unwrap_err();
        assert!(e.to_string().contains("unknown key \"sigma\""));
        assert!(Config::parse(Path::new("c"), "L = 1\nL = 2\n", KEYS).is_err());
        assert!(Config::parse(Path::new("c"), "L 1\n", KEYS).is_err());
        let c = Config::parse(Path::new("c"), "L = x\n", KEYS).unwrap();
        assert!(c.get::<usize>("L").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<i64>("2, 2,2,0").unwrap(), vec![2, 2, 2, 0]);
        assert!(parse_list::<i64>("2,a").is_err());
        assert!(parse_list::<i64>("").unwrap().is_empty());
    }
}
