//! Flat `key = value` configuration files.
//!
//! One dotted key per line, `#` starts a comment. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN: &[&str] = &[
    "problem",
    "dahlquist.lambda",
    "dahlquist.u0",
    "dahlquist.t0",
    "dahlquist.tf",
    "heat.dof",
    "heat.x0",
    "heat.x1",
    "heat.t0",
    "heat.tf",
    "heat.forcing",
    "heat.folded",
    "grayscott.n",
    "grayscott.length",
    "grayscott.feed",
    "grayscott.kill",
    "grayscott.du",
    "grayscott.dv",
    "grayscott.reaction",
    "grayscott.t0",
    "grayscott.tf",
    "grayscott.newton_tol",
    "grayscott.max_newton",
    "grayscott.bound",
    "grid.points",
    "solver.levels",
    "solver.m",
    "solver.k",
    "solver.mode",
    "solver.relaxation",
    "solver.nu",
    "solver.max_iters",
    "solver.tol",
    "solver.norm",
    "solver.initial_guess",
    "solver.initial_value",
    "solver.seed",
    "solver.coarse_substeps",
    "run.workers",
    "output.path",
    "sweep.m",
    "sweep.k",
    "theory.lambda",
    "theory.mu",
    "theory.m",
    "theory.k",
    "theory.p",
    "theory.spectrum",
    "propagator.kind",
    "propagator.phi",
    "propagator.psi",
    "propagator.m",
    "propagator.k",
    "propagator.n_t",
    "propagator.p",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Value {
                    line,
                    key: key.into(),
                    message: "empty value".into(),
                });
            }
            if entries.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("`{key}` given twice"),
                });
            }
        }
        Ok(Config { entries })
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn parse_one<T>(&self, key: &str, line: usize, raw: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        raw.parse().map_err(|e: T::Err| ConfigError::Value {
            line,
            key: key.into(),
            message: format!("`{raw}`: {e}"),
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|(line, raw)| self.parse_one(key, *line, raw))
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| ConfigError::Invalid(format!("missing required key `{key}`")))
    }

    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some((line, raw)) = self.entries.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|item| self.parse_one(key, *line, item.trim()))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn require_list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.list(key)?
            .ok_or_else(|| ConfigError::Invalid(format!("missing required key `{key}`")))
    }

    /// Parses `key` with `choose`, which maps a lower-cased word to a value.
    pub fn choice<T>(
        &self,
        key: &str,
        default: T,
        choose: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, raw)) => choose(&raw.to_ascii_lowercase()).ok_or_else(|| ConfigError::Value {
                line: *line,
                key: key.into(),
                message: format!("`{raw}` is not one of {expected}"),
            }),
        }
    }
}
