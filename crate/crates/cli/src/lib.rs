//! Scenario runner for `cnp-core`: reads JSON scenario files, runs one task
//! per scenario and writes versioned JSON reports (CSV for root-function
//! sweeps).

use std::path::Path;

mod error;
pub mod report;
pub mod run;
pub mod scenario;
pub mod suite;

pub use error::CliError;
pub use report::Report;
pub use run::run;
pub use scenario::{Overrides, Scenario, Task};
pub use suite::{run_suite, SuiteSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    /// Sweep rows; only meaningful for the rootfn task.
    Csv,
}

/// Writes `<dir>/<stem>.json`, plus `<stem>.csv` for sweeps when CSV is requested.
pub fn write_report(report: &Report, dir: &Path, stem: &str, format: Format) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let write = |name: String, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    };
    write(format!("{stem}.json"), report.to_json())?;
    if format == Format::Csv {
        if let Some(csv) = report.to_csv() {
            write(format!("{stem}.csv"), csv)?;
        }
    }
    Ok(())
}
