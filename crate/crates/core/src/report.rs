//! Verification reports shared by every checker.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

const MAX_WITNESSES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Follows from finite data or a closed-form argument.
    Structural,
    /// Exhaustive on the stated window only.
    WindowCertified,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub certification: Certification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<i64>,
    pub witnesses: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, Value>,
}

impl CheckResult {
    pub fn new(certification: Certification, window: Option<i64>) -> Self {
        CheckResult { pass: true, certification, window, witnesses: Vec::new(), data: BTreeMap::new() }
    }

    pub fn structural() -> Self {
        Self::new(Certification::Structural, None)
    }

    pub fn windowed(b: i64) -> Self {
        Self::new(Certification::WindowCertified, Some(b))
    }

    pub fn fail(&mut self, witness: impl Into<String>) {
        self.pass = false;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(witness.into());
        }
    }

    /// Records a failure when `ok` is false.
    pub fn require(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        if !ok {
            self.fail(witness());
        }
    }

    pub fn with(mut self, key: &str, v: impl Serialize) -> Self {
        self.data.insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
        self
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.data.insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
    }

    pub fn absorb(&mut self, other: CheckResult) {
        if !other.pass {
            self.pass = false;
        }
        for w in other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w);
            }
        }
        self.data.extend(other.data);
    }
}

/// Named checks; passes when every check passes.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub checks: BTreeMap<String, CheckResult>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn add(&mut self, name: impl Into<String>, c: CheckResult) {
        self.checks.insert(name.into(), c);
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.get(name)
    }

    pub fn merge(&mut self, prefix: &str, other: Report) {
        for (k, v) in other.checks {
            self.checks.insert(format!("{prefix}{k}"), v);
        }
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, c)| format!("{k}: {}", c.witnesses.join("; ")))
            .collect()
    }
}
