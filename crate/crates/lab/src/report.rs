//! Run reports: per-invariant pass/fail with measured margins, diagnostic
//! metrics and per-level arrays, the emitted file manifest and wall-clock.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::fieldio::write_atomic;

/// Margins are signed slack: non-negative iff the invariant holds.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

impl InvariantCheck {
    pub fn from_margin(name: &str, margin: f64, detail: String) -> Self {
        InvariantCheck { name: name.to_string(), passed: margin >= 0.0, margin, detail }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub passed: bool,
    /// Set when the solver aborted; the run then fails regardless of the
    /// individual checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub invariants: Vec<InvariantCheck>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub arrays: BTreeMap<String, Vec<f64>>,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(scenario: ScenarioConfig) -> Self {
        RunReport {
            scenario,
            passed: false,
            failure: None,
            warnings: Vec::new(),
            invariants: Vec::new(),
            metrics: BTreeMap::new(),
            arrays: BTreeMap::new(),
            files: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn seal(&mut self) {
        self.passed = self.failure.is_none() && self.invariants.iter().all(|c| c.passed);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}
