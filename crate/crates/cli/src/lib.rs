//! Config-driven experiment runner for the `semigrad` estimators.

use thiserror::Error;

pub mod check;
pub mod config;
pub mod report;
pub mod runner;

pub use check::run_checks;
pub use config::{parse_manifest, ExperimentConfig};
pub use report::{read_csv, write_checks, write_records, CsvRow, Format, CSV_COLUMNS};
pub use runner::{list_scenarios, run_experiment, run_suite, EstimatorId, ReportRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown estimator {0:?}")]
    UnknownEstimator(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Estimator(#[from] semigrad::Error),
    #[error("i/o: {0}")]
    Io(String),
}

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const TOLERANCE: u8 = 2;
}

/// Exit code summarizing a set of records: errors dominate failures.
pub fn exit_code(records: &[ReportRecord]) -> u8 {
    if records.iter().any(ReportRecord::is_error) {
        exit::ERROR
    } else if records.iter().any(|r| !r.pass) {
        exit::TOLERANCE
    } else {
        exit::PASS
    }
}
