use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlfix_cli::report::read_diagnosis;
use mlfix_cli::{synth, CliError, IngestConfig, OfflineOptions, ReportFormat};

/// Diagnose ML training workflows from dataset aggregates.
#[derive(Parser)]
#[command(name = "mlfix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dataset checks and write an artifact bundle.
    Ingest(IngestArgs),
    /// Obtain a diagnosis for a bundle from a server or in-process.
    Analyze(AnalyzeArgs),
    /// Render a diagnosis as a Finding / Action table.
    Report {
        #[arg(long)]
        diagnosis: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: ReportFormat,
    },
    /// Write stub fixtures answering every prompt the pipeline issues for a bundle.
    RecordFixtures {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        offline: OfflineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset (train.csv, test.csv, schema.json).
    Synth {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Training rows for the wide scenario.
        #[arg(long, default_value_t = 100_000)]
        rows: usize,
        /// Total columns for the wide scenario.
        #[arg(long, default_value_t = 20)]
        columns: usize,
        /// Cell value planted once in the partition scenario.
        #[arg(long)]
        sentinel: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Partition,
    Wide,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    predictions_train: Option<PathBuf>,
    #[arg(long)]
    predictions_test: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSON file of check threshold overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(id = "target", required = true, multiple = false, args = ["server", "offline"])]
struct AnalyzeArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Analysis server base URL.
    #[arg(long)]
    server: Option<String>,
    /// Run the pipeline in-process.
    #[arg(long)]
    offline: bool,
    /// Seconds to wait for the server.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[command(flatten)]
    options: OfflineArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OfflineArgs {
    /// Stub fixture file (prompt hash to completion) used as the provider.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Knowledge-base directory; defaults to MLFIX_KB_PATH, then the shipped corpus.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    consensus_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl OfflineArgs {
    fn options(&self) -> OfflineOptions {
        OfflineOptions {
            fixtures: self.fixtures.clone(),
            kb_dir: self.kb.clone(),
            consensus_k: self.consensus_k,
            seed: self.seed,
            ..OfflineOptions::default()
        }
        .with_env(|k| std::env::var(k).ok())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => {
            let config = IngestConfig {
                train: a.train,
                test: a.test,
                schema: a.schema,
                predictions_train: a.predictions_train,
                predictions_test: a.predictions_test,
                checkpoint: a.checkpoint,
                check_config: a.config,
                out: a.out,
            };
            let epoch = std::env::var("SOURCE_DATE_EPOCH").ok();
            let created_at = mlfix_cli::bundle_timestamp(epoch.as_deref())?;
            let outcome = mlfix_cli::ingest(&config, created_at)?;
            eprintln!(
                "wrote {} ({} train rows, {} test rows, {} unparsable numeric cells read as null)",
                config.out.display(),
                outcome.train.rows,
                outcome.test.rows,
                outcome.train.parse_failures + outcome.test.parse_failures
            );
        }
        Command::Analyze(a) => {
            if let Some(url) = &a.server {
                let timeout = Duration::try_from_secs_f64(a.timeout)
                    .map_err(|_| CliError::Input(format!("invalid timeout {}", a.timeout)))?;
                mlfix_cli::submit(&a.bundle, url, timeout, &a.out)?;
            } else {
                let d = mlfix_cli::analyze_offline(&a.bundle, &a.options.options(), &a.out)?;
                if d.degraded {
                    eprintln!("note: provider unavailable or incomplete; diagnosis is rule-based");
                }
            }
            eprintln!("wrote {}", a.out.display());
        }
        Command::Report { diagnosis, format } => {
            let d = read_diagnosis(&diagnosis)?;
            print!("{}", mlfix_cli::render_report(&d, format));
        }
        Command::RecordFixtures { bundle, offline, out } => {
            let n = mlfix_cli::record_fixtures(&bundle, &offline.options(), &out)?;
            eprintln!("wrote {} ({n} fixtures)", out.display());
        }
        Command::Synth {
            scenario,
            out,
            seed,
            rows,
            columns,
            sentinel,
        } => {
            let paths = match scenario {
                Scenario::Partition => synth::write_partition(&out, seed, sentinel.as_deref())?,
                Scenario::Wide => synth::write_wide(&out, rows, columns, seed)?,
            };
            eprintln!("wrote {}, {}, {}", paths.train.display(), paths.test.display(), paths.schema.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
