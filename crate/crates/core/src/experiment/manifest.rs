//! Run manifests: config echo, timing and per-criterion outcomes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_json;

use super::config::ExperimentConfig;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Measured numbers keyed by name.
    pub measured: BTreeMap<String, f64>,
    /// Thresholds or brackets the numbers were checked against.
    pub requirement: String,
}

impl CriterionResult {
    pub fn new(id: u8, name: &str, requirement: &str) -> Self {
        Self {
            id,
            name: name.into(),
            passed: true,
            measured: BTreeMap::new(),
            requirement: requirement.into(),
        }
    }

    /// Records a value and folds `ok` into the verdict.
    pub fn check(&mut self, key: &str, value: f64, ok: bool) -> &mut Self {
        self.measured.insert(key.into(), value);
        self.passed &= ok;
        self
    }

    /// Records a value that does not affect the verdict.
    pub fn record(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn line(&self) -> String {
        let values: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        format!(
            "criterion {:>2} [{}] {}: {} ({})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            values.join(" "),
            self.requirement
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub criteria: Vec<CriterionResult>,
    /// Diagnostics reported without a pass/fail verdict.
    pub supplementary: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn criterion(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}
