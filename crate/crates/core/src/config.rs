//! Run configuration shared by the CLI and the suites.

use std::path::PathBuf;

use serde::Serialize;

use crate::lie::{FormKind, LieContext, Tolerances};
use crate::symplectic::PhaseSpace;
use crate::{Error, Result};

pub const DEFAULT_MAX_N: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: Tolerances,
    pub form: FormKind,
    pub mf_include_constants: bool,
    pub out: Option<PathBuf>,
    pub max_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            seed: 1,
            samples: 100,
            tolerances: Tolerances::default(),
            form: FormKind::TraceForm,
            mf_include_constants: false,
            out: None,
            max_n: DEFAULT_MAX_N,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidInput(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    /// Applies one `key=value` setting. Keys match the CLI flags without the
    /// leading dashes; `-` and `_` are interchangeable.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if let Some(name) = key.strip_prefix("tol.") {
            let v: f64 = parse_num(&key, value)?;
            return self.tolerances.set(name, v);
        }
        match key.as_str() {
            "n" => self.n = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "samples" => self.samples = parse_num(&key, value)?,
            "form" => {
                self.form = FormKind::parse(value)
                    .ok_or_else(|| Error::InvalidInput(format!("form: expected trace or killing, got '{value}'")))?
            }
            "mf_include_constants" => self.mf_include_constants = parse_bool(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "max_n" => self.max_n = parse_num(&key, value)?,
            _ => return Err(Error::InvalidInput(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Plain `key=value` lines; blank lines and `#` comments are ignored.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > self.max_n {
            return Err(Error::InvalidInput(format!(
                "n must lie in 2..={} (got {})",
                self.max_n, self.n
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("samples must be positive".into()));
        }
        Ok(())
    }

    pub fn context(&self) -> Result<LieContext> {
        self.validate()?;
        LieContext::with_tolerances(self.n, self.form, self.tolerances.clone())
    }

    pub fn phase_space(&self) -> Result<PhaseSpace> {
        PhaseSpace::new(self.context()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_file_text("# comment\nn = 3\nseed=7\nform=killing\ntol.bracket=1e-15\nmf-include-constants=true\n")
            .unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.seed, 7);
        assert_eq!(c.form, FormKind::KillingForm);
        assert_eq!(c.tolerances.bracket, 1e-15);
        assert!(c.mf_include_constants);
        assert!(c.apply("bogus", "1").is_err());
        assert!(c.apply("tol.bogus", "1").is_err());
        assert!(c.apply_file_text("n 3").is_err());
    }

    #[test]
    fn caps() {
        let mut c = RunConfig {
            n: 9,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c.n = 1;
        assert!(c.validate().is_err());
        c.n = 8;
        assert!(c.validate().is_ok());
    }
}
