//! Versioned machine-readable run reports.
//!
//! Reports are deterministic for a fixed (config, seed): ordered maps, no
//! timestamps, and a stable serializer, so repeated runs are byte-identical.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    pub seed: u64,
    /// Resolved parameters, defaults included.
    pub parameters: BTreeMap<String, Value>,
    /// Every tolerance the run compared against, by name.
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub hypothesis_failed: bool,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Set when a failure is a hypothesis verdict rather than a broken
    /// invariant (for example a divergent budget integral).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    pub details: BTreeMap<String, Value>,
}

impl Check {
    pub fn new(name: &str, pass: bool) -> Self {
        Check {
            name: name.into(),
            pass,
            verdict: None,
            details: BTreeMap::new(),
        }
    }

    pub fn hypothesis_failed(mut self) -> Self {
        self.verdict = Some("hypothesis_failed".into());
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.into(), value.into());
        self
    }
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: format!("skodiv {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            seed,
            parameters: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            checks: Vec::new(),
            passed: true,
            hypothesis_failed: false,
        }
    }

    pub fn parameter(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.into(), value);
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.pass;
        self.hypothesis_failed |= check.verdict.as_deref() == Some("hypothesis_failed");
        self.checks.push(check);
    }

    /// Folds another report's checks into this one under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for (name, value) in other.tolerances {
            self.tolerances.insert(name, value);
        }
        for (key, value) in other.parameters {
            self.parameters.insert(format!("{prefix}.{key}"), value);
        }
        for mut check in other.checks {
            check.name = format!("{prefix}/{}", check.name);
            self.push(check);
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.hypothesis_failed {
            2
        } else if self.passed {
            0
        } else {
            1
        }
    }

    pub fn render(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
