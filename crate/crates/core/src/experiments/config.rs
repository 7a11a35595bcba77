//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fig1,
    Synth,
    AttackEval,
    Moments,
    Privatize,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Fig1 => "fig1",
            Command::Synth => "synth",
            Command::AttackEval => "attack-eval",
            Command::Moments => "moments",
            Command::Privatize => "privatize",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Command::Fig1),
            "synth" => Ok(Command::Synth),
            "attack-eval" => Ok(Command::AttackEval),
            "moments" => Ok(Command::Moments),
            "privatize" => Ok(Command::Privatize),
            other => Err(Error::validation(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Evenly spaced grid from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: Command,
    pub eta_grid: Vec<f64>,
    pub n_values: Vec<usize>,
    #[serde(rename = "M_set")]
    pub m_set: Vec<u32>,
    pub d: usize,
    pub n_samples: usize,
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Keys not listed above, kept verbatim for the individual runners.
    pub extras: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Defaults for each experiment.
    pub fn defaults(name: Command) -> Self {
        let base = Self {
            name,
            eta_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4],
            n_values: vec![12],
            m_set: vec![2],
            d: 3,
            n_samples: 50_000,
            runs: 5,
            seed: 0,
            output_dir: PathBuf::from("out"),
            extras: BTreeMap::new(),
        };
        match name {
            Command::Fig1 => Self {
                eta_grid: linspace(0.01, 0.49, 50),
                n_values: vec![8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48],
                ..base
            },
            Command::Synth => Self {
                m_set: vec![2, 4, 6],
                ..base
            },
            _ => base,
        }
    }

    /// Parses `key = value` lines. `#` starts a comment; lists are
    /// comma-separated; `linspace(lo, hi, k)` is accepted for `eta_grid`.
    /// `name` selects the defaults the other keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = key_value_lines(text)?;
        let name = pairs
            .iter()
            .find(|(_, k, _)| k == "name")
            .map(|(_, _, v)| v.parse::<Command>())
            .transpose()?
            .ok_or_else(|| Error::validation("config must set `name`"))?;
        let mut cfg = Self::defaults(name);
        for (row, key, value) in pairs {
            let bad = |message: String| Error::Malformed { row, col: 1, message };
            match key.as_str() {
                "name" => {}
                "eta_grid" => cfg.eta_grid = parse_grid(&value).map_err(|e| bad(e.to_string()))?,
                "n_values" => cfg.n_values = parse_list(&value).map_err(bad)?,
                "M_set" | "m_set" => cfg.m_set = parse_list(&value).map_err(bad)?,
                "d" => cfg.d = parse_one(&value).map_err(bad)?,
                "n_samples" => cfg.n_samples = parse_one(&value).map_err(bad)?,
                "runs" => cfg.runs = parse_one(&value).map_err(bad)?,
                "seed" => cfg.seed = parse_one(&value).map_err(bad)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                _ => {
                    cfg.extras.insert(key, value);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta_grid.is_empty() || self.n_values.is_empty() || self.m_set.is_empty() {
            return Err(Error::validation("eta_grid, n_values and M_set must be non-empty"));
        }
        if let Some(e) = self.eta_grid.iter().find(|e| !(**e > 0.0 && **e <= 0.5)) {
            return Err(Error::validation(format!("eta {e} outside (0, 1/2]")));
        }
        if let Some(m) = self.m_set.iter().find(|m| **m < 2 || **m % 2 != 0) {
            return Err(Error::validation(format!("M = {m} is not an even integer >= 2")));
        }
        if self.d == 0 || self.runs == 0 {
            return Err(Error::validation("d and runs must be positive"));
        }
        Ok(())
    }

    /// Typed extra value, or `default` when absent.
    pub fn extra<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.extras.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::validation(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn extra_str(&self, key: &str) -> Option<&str> {
        self.extras.get(key).map(String::as_str)
    }
}

/// `(line, key, value)` for every non-blank line of a flat config.
fn key_value_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Malformed {
            row: i + 1,
            col: 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Flat `key = value` text as a map; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    Ok(key_value_lines(text)?.into_iter().map(|(_, k, v)| (k, v)).collect())
}

/// Hex SHA-256 of the configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_one<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_one)
        .collect()
}

fn parse_grid(v: &str) -> Result<Vec<f64>> {
    if let Some(args) = v.strip_prefix("linspace(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::validation("linspace takes (lo, hi, points)"));
        }
        let lo: f64 = parse_one(parts[0]).map_err(Error::Validation)?;
        let hi: f64 = parse_one(parts[1]).map_err(Error::Validation)?;
        let k: usize = parse_one(parts[2]).map_err(Error::Validation)?;
        return Ok(linspace(lo, hi, k));
    }
    parse_list(v).map_err(Error::Validation)
}
