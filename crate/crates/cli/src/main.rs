mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taxnext_core::eventlog::{DEFAULT_MIN_CASES, MAX_DIAGNOSES};
use taxnext_core::predictor::Mode;
use taxnext_core::similarity::Variant;

/// Next-activity prediction for clinical event logs with taxonomy-aware
/// trace similarity.
#[derive(Debug, Parser)]
#[command(name = "taxnext", version)]
struct Cli {
    /// Worker threads for parallel work, 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one event log per primary-diagnosis category from CSV input.
    Ingest(IngestArgs),
    /// Print descriptive statistics of event logs.
    Stats(StatsArgs),
    /// Rank next-activity candidates for one query.
    Predict(PredictArgs),
    /// Leave-one-out evaluation of the T and B predictors.
    Evaluate(EvaluateArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write a seeded synthetic log and its toy taxonomies.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TaxonomyArgs {
    /// Diagnosis taxonomy: CMS ICD-10-CM order file, or `child<TAB>parent` TSV (*.tsv).
    #[arg(long = "tax-cm", value_name = "FILE")]
    tax_cm: Option<PathBuf>,
    /// Procedure taxonomy: CMS ICD-10-PCS order file, or `child<TAB>parent` TSV (*.tsv).
    #[arg(long = "tax-pcs", value_name = "FILE")]
    tax_pcs: Option<PathBuf>,
    /// Category/block/chapter TSV that adds chapter and block levels to ICD-10-CM.
    #[arg(long = "cm-groups", value_name = "FILE")]
    cm_groups: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, value_name = "FILE")]
    diagnoses: PathBuf,
    #[arg(long, value_name = "FILE")]
    procedures: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_CASES)]
    min_cases: usize,
    /// Keep at most this many diagnoses per case.
    #[arg(long, default_value_t = MAX_DIAGNOSES)]
    max_diagnoses: u32,
    /// What to do with cases holding codes missing from a given taxonomy.
    #[arg(long, value_enum, default_value_t = OnUnknown::Drop)]
    on_unknown: OnUnknown,
    #[command(flatten)]
    tax: TaxonomyArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OnUnknown {
    Drop,
    Fail,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Event log JSON files.
    #[arg(long = "log", value_name = "FILE", required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    log: PathBuf,
    #[command(flatten)]
    tax: TaxonomyArgs,
    /// Diagnosis list as `CODE:SEQ,CODE:SEQ,...`.
    #[arg(long)]
    diagnoses: String,
    /// Procedure codes observed so far, comma separated.
    #[arg(long)]
    events: String,
    #[arg(short, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value = "T", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value = "score_sum", value_parser = parse_mode)]
    mode: Mode,
    /// Sum scores over this many best-ranked cases only.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Print the full result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Event log JSON files.
    #[arg(long = "log", value_name = "FILE", num_args = 1.., required_unless_present = "synthetic")]
    logs: Vec<PathBuf>,
    #[command(flatten)]
    tax: TaxonomyArgs,
    /// Evaluate a generated log instead of files.
    #[arg(long, conflicts_with = "logs")]
    synthetic: bool,
    /// Seed of the synthetic log.
    #[arg(long, default_value_t = 42, requires = "synthetic")]
    seed: u64,
    /// Cases in the synthetic log.
    #[arg(long, default_value_t = 200, requires = "synthetic")]
    cases: usize,
    #[arg(short, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value = "score_sum", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long)]
    neighbors: Option<usize>,
    /// Run a single variant; the report then has no p-values.
    #[arg(long, value_parser = parse_variant)]
    variant_only: Option<Variant>,
    /// Average within each trace before averaging over traces.
    #[arg(long)]
    per_trace: bool,
    /// Unpaired Welch test instead of the paired t-test.
    #[arg(long)]
    welch: bool,
    /// Per-log CSV; the per-prefix CSV and the JSON report go next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML config naming taxonomies, logs and defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Listen address, overrides the config (`PORT` overrides the port).
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
    /// Also load a synthetic log generated with this seed.
    #[arg(long, value_name = "SEED")]
    synthetic: Option<u64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Exit status 1: bad flags. Exit status 2: inputs that do not load or fit.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let out = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Stats(a) => commands::stats(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Serve(a) => commands::serve(a),
        Command::Synth(a) => commands::synth(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
