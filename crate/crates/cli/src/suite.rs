//! Runs every scenario file in a directory.

use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;

use crate::error::CliError;
use crate::report::SCHEMA_VERSION;
use crate::scenario::{Overrides, Scenario};
use crate::{run, write_report, Format};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub file: String,
    pub name: Option<String>,
    pub task: Option<String>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub schema_version: u32,
    pub passed: bool,
    pub total: usize,
    pub failed: usize,
    pub scenarios: Vec<SuiteEntry>,
}

impl SuiteSummary {
    pub fn table(&self) -> String {
        let width = self.scenarios.iter().map(|e| e.file.len()).max().unwrap_or(0);
        let mut out = String::new();
        for e in &self.scenarios {
            let mark = if e.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{mark}  {:width$}  {}\n", e.file, e.task.as_deref().unwrap_or("-")));
            if let Some(err) = &e.error {
                out.push_str(&format!("      error: {err}\n"));
            }
            for c in &e.failed_checks {
                out.push_str(&format!("      failed: {c}\n"));
            }
        }
        out.push_str(&format!("{} of {} scenarios passed\n", self.total - self.failed, self.total));
        out
    }
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn run_one(path: &Path, out: Option<&Path>, overrides: &Overrides, format: Format) -> SuiteEntry {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut entry = SuiteEntry {
        file,
        name: None,
        task: None,
        passed: false,
        error: None,
        failed_checks: Vec::new(),
    };
    let outcome = (|| -> Result<(), CliError> {
        let mut scenario = Scenario::load(path)?;
        scenario.apply(overrides);
        entry.name = Some(scenario.name.clone());
        let report = run(&scenario, None)?;
        entry.task = Some(report.task.name().to_string());
        entry.passed = report.passed;
        entry.error = report.error.clone();
        entry.failed_checks = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if let Some(dir) = out {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            write_report(&report, dir, &stem, format)?;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        entry.passed = false;
        entry.error = Some(e.to_string());
    }
    entry
}

/// Runs all `*.json` scenarios in `dir` concurrently; reports go to
/// `out/<file stem>.json` and the summary to `out/summary.json`.
pub fn run_suite(
    dir: &Path,
    out: Option<&Path>,
    overrides: &Overrides,
    format: Format,
) -> Result<SuiteSummary, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"),
        });
    }
    let files = scenario_files(dir)?;
    if let Some(o) = out {
        std::fs::create_dir_all(o).map_err(|source| CliError::Io {
            path: o.to_path_buf(),
            source,
        })?;
    }
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(files.len().max(1));
    let mut entries: Vec<Option<SuiteEntry>> = vec![None; files.len()];
    thread::scope(|scope| {
        let chunks: Vec<_> = files
            .iter()
            .enumerate()
            .collect::<Vec<_>>()
            .chunks(files.len().div_ceil(workers).max(1))
            .map(|c| c.to_vec())
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|(i, path)| (i, run_one(path, out, overrides, format)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, e) in h.join().expect("scenario worker panicked") {
                entries[i] = Some(e);
            }
        }
    });
    let scenarios: Vec<SuiteEntry> = entries.into_iter().map(|e| e.expect("every scenario ran")).collect();
    let failed = scenarios.iter().filter(|e| !e.passed).count();
    let summary = SuiteSummary {
        schema_version: SCHEMA_VERSION,
        passed: failed == 0,
        total: scenarios.len(),
        failed,
        scenarios,
    };
    if let Some(o) = out {
        let path = o.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(summary)
}
