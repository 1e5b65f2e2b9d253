//! Command-line client for mlfix: turns CSV datasets into artifact bundles,
//! obtains diagnoses from a server or in-process, and renders them.

pub mod analyze;
pub mod error;
pub mod ingest;
pub mod input;
pub mod report;
pub mod synth;

pub use analyze::{analyze_offline, record_fixtures, submit, OfflineOptions};
pub use error::CliError;
pub use ingest::{bundle_timestamp, ingest, IngestConfig, IngestOutcome};
pub use input::{read_csv, CsvReport};
pub use report::{render_report, ReportFormat};
