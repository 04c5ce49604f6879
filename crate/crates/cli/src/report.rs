//! Machine-readable pass/fail report. Contains no timestamps, so reruns are byte-identical.
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub assertion: String,
    /// Relation the observation must satisfy, e.g. `"<= 1e-6"`.
    pub expected: String,
    pub observed: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub pass: bool,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Report { experiment: experiment.to_string(), pass: true, assertions: Vec::new() }
    }

    fn push(&mut self, assertion: &str, expected: String, observed: f64, tolerance: Option<f64>, pass: bool) {
        self.pass &= pass;
        self.assertions.push(Assertion { assertion: assertion.to_string(), expected, observed, tolerance, pass });
    }

    /// `observed ≤ tol`; NaN fails.
    pub fn below(&mut self, assertion: &str, observed: f64, tol: f64) {
        self.push(assertion, format!("<= {tol:e}"), observed, Some(tol), observed <= tol);
    }

    /// `observed ≥ bound`.
    pub fn at_least(&mut self, assertion: &str, observed: f64, bound: f64) {
        self.push(assertion, format!(">= {bound}"), observed, None, observed >= bound);
    }

    pub fn positive(&mut self, assertion: &str, observed: f64) {
        self.push(assertion, "> 0".into(), observed, None, observed > 0.0);
    }

    /// `observed < bound` with no tolerance attached.
    pub fn less_than(&mut self, assertion: &str, observed: f64, bound: f64) {
        self.push(assertion, format!("< {bound:e}"), observed, None, observed < bound);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
