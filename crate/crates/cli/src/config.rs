//! Flat `key = value` configuration files. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, reason: String },
    Duplicate { key: String, line: usize, first: usize },
    Missing(String),
    Value { key: String, line: usize, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, reason } => write!(f, "line {line}: {reason}"),
            ConfigError::Duplicate { key, line, first } => {
                write!(f, "line {line}: key `{key}` already set on line {first}")
            }
            ConfigError::Missing(key) => write!(f, "missing required key `{key}`"),
            ConfigError::Value { key, line, reason } => {
                write!(f, "line {line}: invalid value for `{key}`: {reason}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KNOWN_KEYS: &[&str] = &[
    "system",
    "potential",
    "dim",
    "epsilon",
    "epsilon_list",
    "T",
    "ramp",
    "order_n",
    "max_iter",
    "rtol",
    "alpha",
    "kappa",
    "seed",
    "out_dir",
    "basepoint",
    "initial_guess",
    "modes",
    "theta_star",
    "newton_tol",
    "newton_max",
    "workers",
];

#[derive(Debug, Default, Clone)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(text.parse()?)
    }

    /// Keys present in the file but not understood by any command.
    pub fn unknown_keys(&self) -> Vec<(&str, usize)> {
        self.entries
            .iter()
            .filter(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()))
            .map(|(k, (_, line))| (k.as_str(), *line))
            .collect()
    }

    pub fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::Value {
                key: key.to_string(),
                line,
                reason: e.to_string(),
            }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Comma-separated list; `None` when the key is absent.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e: T::Err| ConfigError::Value {
                    key: key.to_string(),
                    line,
                    reason: format!("`{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn value_error(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            line: self.raw(key).map(|r| r.1).unwrap_or(0),
            reason: reason.into(),
        }
    }
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("malformed key `{key}`"),
                });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    line,
                    first: *first,
                });
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(Config { entries })
    }
}
