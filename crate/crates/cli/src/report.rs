//! Report documents written for every scenario run.

use std::fmt::Write as _;

use cnp_core::coeffmodel::RootFunctionReport;
use cnp_core::Tolerances;
use serde::Serialize;
use serde_json::Value;

use crate::scenario::{Expectation, Task};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, format!("{value:.3e} <= {bound:.1e}"))
    }

    /// `value ≥ bound`.
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value >= bound, format!("{value:.3e} >= {bound:.1e}"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub task: Task,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Set when the task itself failed; `result` is then null.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    #[serde(skip)]
    pub sweep: Option<(RootFunctionReport, String)>,
}

impl Report {
    pub fn new(name: &str, task: Task, tolerances: Tolerances, seed: Option<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            task,
            tolerances,
            seed,
            passed: false,
            checks: Vec::new(),
            error: None,
            result: Value::Null,
            sweep: None,
        }
    }

    pub fn finish(mut self, expectations: &[Expectation]) -> Self {
        for e in expectations {
            self.checks.push(evaluate(&self.result, e));
        }
        self.passed = self.error.is_none() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    /// CSV rows `r,theta,G_value,D,generator_spec` for sweep reports.
    pub fn to_csv(&self) -> Option<String> {
        let (sweep, label) = self.sweep.as_ref()?;
        let mut out = String::from("r,theta,G_value,D,generator_spec\n");
        for s in &sweep.samples {
            let _ = writeln!(out, "{},{},{},{},\"{}\"", s.r, s.theta, s.value, sweep.degree, label);
        }
        Some(out)
    }
}

fn evaluate(result: &Value, e: &Expectation) -> Check {
    let name = format!("expect {}", e.path);
    let Some(actual) = result.pointer(&e.path) else {
        return Check::new(name, false, "no such value in the result");
    };
    let mut failures = Vec::new();
    if let Some(expected) = &e.equals {
        let ok = match (actual.as_f64(), expected.as_f64()) {
            (Some(a), Some(b)) => (a - b).abs() <= e.tol.unwrap_or(0.0),
            _ => actual == expected,
        };
        if !ok {
            failures.push(format!("expected {expected}"));
        }
    }
    if let Some(min) = e.min {
        if !actual.as_f64().is_some_and(|a| a >= min) {
            failures.push(format!("expected >= {min}"));
        }
    }
    if let Some(max) = e.max {
        if !actual.as_f64().is_some_and(|a| a <= max) {
            failures.push(format!("expected <= {max}"));
        }
    }
    if failures.is_empty() {
        Check::new(name, true, format!("{actual}"))
    } else {
        Check::new(name, false, format!("got {actual}, {}", failures.join(", ")))
    }
}
