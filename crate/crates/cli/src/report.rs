//! CSV and JSON serialization of report records.

use std::io::Write;

use clap::ValueEnum;
use semigrad::diagnostics::BoundCheckReport;
use serde::{Deserialize, Serialize};

use crate::runner::ReportRecord;
use crate::CliError;

/// Column set of the CSV report, in order.
pub const CSV_COLUMNS: [&str; 12] = [
    "scenario",
    "estimator",
    "t",
    "n_paths",
    "n_steps",
    "seed",
    "mean",
    "std_error",
    "oracle",
    "abs_error",
    "pass",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One CSV row. `pass` is `true`, `false`, or `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub estimator: String,
    pub t: f64,
    pub n_paths: u64,
    pub n_steps: u64,
    pub seed: u64,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub oracle: Option<f64>,
    pub abs_error: Option<f64>,
    pub pass: String,
    pub wall_ms: u64,
}

impl From<&ReportRecord> for CsvRow {
    fn from(r: &ReportRecord) -> Self {
        Self {
            scenario: r.scenario.clone(),
            estimator: r.estimator.clone(),
            t: r.t,
            n_paths: r.n_paths,
            n_steps: r.n_steps,
            seed: r.seed,
            mean: r.mean,
            std_error: r.std_error,
            oracle: r.oracle,
            abs_error: r.abs_error,
            pass: if r.is_error() { "error".into() } else { r.pass.to_string() },
            wall_ms: r.wall_ms,
        }
    }
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Writes the records as CSV (header always present) or a JSON array.
pub fn write_records(records: &[ReportRecord], format: Format, out: impl Write) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_COLUMNS).map_err(io)?;
            for r in records {
                w.serialize(CsvRow::from(r)).map_err(io)?;
            }
            w.flush().map_err(io)
        }
        Format::Json => write_json(records, out),
    }
}

/// Writes diagnostic reports as CSV or a JSON array.
pub fn write_checks(reports: &[BoundCheckReport], format: Format, out: impl Write) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["name", "claimed_bound", "empirical", "std_error", "margin", "pass", "warnings"])
                .map_err(io)?;
            for r in reports {
                w.write_record([
                    r.name.clone(),
                    r.claimed_bound.to_string(),
                    r.empirical.to_string(),
                    r.std_error.to_string(),
                    r.margin.to_string(),
                    r.pass.to_string(),
                    r.warnings.join("; "),
                ])
                .map_err(io)?;
            }
            w.flush().map_err(io)
        }
        Format::Json => write_json(reports, out),
    }
}

fn write_json<T: Serialize>(items: &[T], mut out: impl Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, items).map_err(io)?;
    writeln!(out).map_err(io)
}

/// Reads rows back from CSV.
pub fn read_csv(input: impl std::io::Read) -> Result<Vec<CsvRow>, CliError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(io)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::runner::run_experiment;

    fn sample() -> Vec<ReportRecord> {
        let cfg = ExperimentConfig::default()
            .with_overrides(&["scenario=ou1d".into(), "estimator=value".into(), "f=x".into(), "n_paths=500".into(), "n_steps=20".into()])
            .unwrap();
        let ok = run_experiment(&cfg).unwrap();
        let bad_cfg = ExperimentConfig {
            scenario: "torus".into(),
            ..cfg
        };
        let bad = ReportRecord::failed(&bad_cfg, &run_experiment(&bad_cfg).unwrap_err());
        vec![ok, bad]
    }

    #[test]
    fn csv_round_trip() {
        let records = sample();
        let mut buf = Vec::new();
        write_records(&records, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let rows = read_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], CsvRow::from(&records[0]));
        assert_eq!(rows[0].mean.unwrap().to_bits(), records[0].mean.unwrap().to_bits());
        assert_eq!(rows[1].pass, "error");
        assert_eq!(rows[1].mean, None);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_records(&[], Format::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn json_is_an_array() {
        let mut buf = Vec::new();
        write_records(&sample(), Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1]["error"].as_str().unwrap().contains("torus"));
        assert_eq!(rows[0]["oracle_source"], "analytic");
    }
}
