//! Strict `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kellerpath::continuation::Sign;
use kellerpath::monotone::Direction;
use kellerpath::verify::Suite;
use serde::Serialize;

/// Keys accepted in a config file (flags use the same names with `-` for `_`).
pub const KEYS: &[&str] = &[
    "dim",
    "mu",
    "a",
    "b",
    "k",
    "count",
    "direction",
    "boundary_layer",
    "annulus_left",
    "i",
    "sign",
    "mu_max",
    "max_steps",
    "profiles",
    "suite",
    "out",
    "plot",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, text: String },
    UnknownKey { line: usize, key: String },
    Duplicate { line: usize, key: String },
    BadValue { key: String, value: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key=value, got {text:?}"),
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key {key:?}"),
            ConfigError::Duplicate { line, key } => write!(f, "line {line}: key {key:?} given twice"),
            ConfigError::BadValue { key, value, reason } => write!(f, "bad value {value:?} for {key}: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses config text into a raw key map. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line, key: k.to_string() });
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate { line, key: k.to_string() });
        }
    }
    Ok(map)
}

pub fn config_load(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub dim: usize,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub count: usize,
    pub direction: String,
    pub boundary_layer: bool,
    pub annulus_left: bool,
    pub i: usize,
    pub sign: String,
    pub mu_max: f64,
    pub max_steps: usize,
    pub profiles: bool,
    pub suite: String,
    pub out: PathBuf,
    pub plot: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dim: 3,
            mu: 200.0,
            a: 0.0,
            b: 1.0,
            k: 1,
            count: 4,
            direction: "increasing".into(),
            boundary_layer: false,
            annulus_left: false,
            i: 2,
            sign: "minus".into(),
            mu_max: 200.0,
            max_steps: 100,
            profiles: false,
            suite: "all".into(),
            out: PathBuf::from("out"),
            plot: false,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.into(), value: v.into(), reason: e.to_string() })
}

fn choice(key: &str, v: &str, allowed: &[&str]) -> Result<String, ConfigError> {
    if allowed.contains(&v) {
        Ok(v.to_string())
    } else {
        Err(ConfigError::BadValue { key: key.into(), value: v.into(), reason: format!("expected one of {}", allowed.join(", ")) })
    }
}

impl Settings {
    /// Applies raw `key -> value` pairs on top of `self`; later maps win.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (k, v) in map {
            match k.as_str() {
                "dim" => self.dim = value(k, v)?,
                "mu" => self.mu = value(k, v)?,
                "a" => self.a = value(k, v)?,
                "b" => self.b = value(k, v)?,
                "k" => self.k = value(k, v)?,
                "count" => self.count = value(k, v)?,
                "direction" => self.direction = choice(k, v, &["increasing", "decreasing"])?,
                "boundary_layer" => self.boundary_layer = value(k, v)?,
                "annulus_left" => self.annulus_left = value(k, v)?,
                "i" => self.i = value(k, v)?,
                "sign" => self.sign = choice(k, v, &["minus", "plus"])?,
                "mu_max" => self.mu_max = value(k, v)?,
                "max_steps" => self.max_steps = value(k, v)?,
                "profiles" => self.profiles = value(k, v)?,
                "suite" => self.suite = choice(k, v, &["pohozaev", "blowup", "limit", "sensitivity", "nondeg", "green", "all"])?,
                "out" => self.out = PathBuf::from(v),
                "plot" => self.plot = value(k, v)?,
                other => return Err(ConfigError::UnknownKey { line: 0, key: other.into() }),
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        if self.direction == "decreasing" {
            Direction::Decreasing
        } else {
            Direction::Increasing
        }
    }

    pub fn sign(&self) -> Sign {
        if self.sign == "plus" {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn suite(&self) -> Suite {
        self.suite.parse().unwrap_or(Suite::All)
    }
}
