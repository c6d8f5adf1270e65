//! Machine-readable verification reports.

use serde::Serialize;

use crate::lie::{FormKind, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "op", content = "bound")]
pub enum Comparison {
    AtMost(f64),
    AtLeast(f64),
    Equals(f64),
    Between(f64, f64),
}

impl Comparison {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Self::AtMost(t) => v <= t,
            Self::AtLeast(t) => v >= t,
            Self::Equals(t) => v == t,
            Self::Between(lo, hi) => v >= lo && v <= hi,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::AtMost(t) => format!("<= {t:.1e}"),
            Self::AtLeast(t) => format!(">= {t}"),
            Self::Equals(t) => format!("== {t}"),
            Self::Between(lo, hi) => format!("in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The mathematical claim this check supports.
    pub anchor: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, measured: f64, comparison: Comparison) -> Self {
        let verdict = if comparison.holds(measured) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            comparison,
            verdict,
            detail: None,
        }
    }

    pub fn error(name: impl Into<String>, anchor: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            measured: f64::NAN,
            comparison: Comparison::AtMost(0.0),
            verdict: Verdict::Error,
            detail: Some(message.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn summary_line(&self) -> String {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        };
        let mut s = format!("{tag} {}: {:.3e} {}", self.name, self.measured, self.comparison.describe());
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub n: usize,
    pub form: FormKind,
    pub samples: usize,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub environment: Environment,
    pub tolerances: Tolerances,
    pub records: Vec<CheckRecord>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, environment: Environment, tolerances: Tolerances, records: Vec<CheckRecord>) -> Self {
        let verdict = overall(&records);
        Self {
            suite: suite.into(),
            environment,
            tolerances,
            records,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Pass iff every record passes; any error dominates a failure.
pub fn overall(records: &[CheckRecord]) -> Verdict {
    if records.iter().any(|r| r.verdict == Verdict::Error) {
        Verdict::Error
    } else if records.iter().all(|r| r.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
