use crate::error::{LabError, Result};
use std::path::PathBuf;
use std::str::FromStr;

/// Largest tree the sweeps accept.
pub const MAX_TREE_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(LabError::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    /// Monte Carlo paths per scenario.
    pub n: usize,
    pub dt: f64,
    pub seed: u128,
    /// Largest tree depth of the exact sweeps.
    pub tree_steps: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// Optional raw-sample CSV.
    pub raw: Option<PathBuf>,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            n: 100_000,
            dt: 1e-4,
            seed: 1,
            tree_steps: MAX_TREE_STEPS,
            format: Format::Json,
            out: None,
            raw: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| LabError::InvalidConfig(format!("bad value `{v}` for `{key}`")))
}

impl LabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LabError::InvalidConfig("n must be positive".into()));
        }
        if !(2..=MAX_TREE_STEPS).contains(&self.tree_steps) {
            return Err(LabError::InvalidConfig(format!(
                "tree-steps must lie in 2..={MAX_TREE_STEPS}"
            )));
        }
        self.scenario().validate()
    }

    pub fn scenario(&self) -> crate::brownian::scenario::ScenarioConfig {
        crate::brownian::scenario::ScenarioConfig {
            seed: self.seed,
            dt: self.dt,
            n: self.n,
        }
    }

    /// Sets one `key = value` entry; keys mirror the CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "n" => self.n = parse(key, v)?,
            "dt" => self.dt = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "tree_steps" => self.tree_steps = parse(key, v)?,
            "format" => self.format = v.parse()?,
            "out" => self.out = Some(PathBuf::from(v)),
            "raw" => self.raw = Some(PathBuf::from(v)),
            other => return Err(LabError::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Flat `key=value` lines; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                LabError::InvalidConfig(format!("line {}: expected key=value", i + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let mut c = LabConfig::default();
        c.apply_file_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_text_and_overrides() {
        let mut c = LabConfig::default();
        c.apply_file_text("# lab\nn = 2000\ndt=0.001\nseed=340282366920938463463374607431768211455\ntree-steps = 6\nformat=csv\n")
            .unwrap();
        assert_eq!(c.n, 2000);
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.seed, u128::MAX);
        assert_eq!(c.tree_steps, 6);
        assert_eq!(c.format, Format::Csv);
        c.set("n", "7").unwrap();
        assert_eq!(c.n, 7);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = LabConfig::default();
        assert!(c.apply_file_text("n 5").is_err());
        assert!(c.apply_file_text("colour=red").is_err());
        assert!(c.apply_file_text("n=-1").is_err());
        assert!(c.apply_file_text("format=xml").is_err());
        let c = LabConfig {
            tree_steps: 13,
            ..LabConfig::default()
        };
        assert!(c.validate().is_err());
        let c = LabConfig {
            dt: 0.3,
            ..LabConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
