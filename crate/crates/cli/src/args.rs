use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gigaudit::metrics::MonthRange;
use gigaudit::model::{EraBoundaries, NaiveTimestamps, YearMonth};
use gigaudit::predict::MatrixMode;

#[derive(Debug, Parser)]
#[command(
    name = "gigaudit",
    version,
    about = "Audit pay, working time and take rates in gig-platform data exports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic driver bundles plus ground_truth.json.
    Synth(SynthArgs),
    /// Run the full metric suite and write audit_report.json.
    Audit(AuditArgs),
    /// Fit per-year pay models and write the R² matrix.
    Predict(PredictArgs),
    /// Write pseudonymised, field-stripped copies of bundles.
    Anon(AnonArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory to create the bundles in.
    #[arg(long)]
    pub out: PathBuf,
}

/// How bundles are read and linked.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Largest delay of an earnings payment after dropoff.
    #[arg(long, default_value_t = gigaudit::linkage::DEFAULT_WINDOW_SECONDS)]
    pub link_window_seconds: i64,
    /// Largest lead of an earnings payment before dropoff.
    #[arg(long, default_value_t = 0)]
    pub link_skew_seconds: i64,
    /// First month of the opaque-fare era and of dynamic pricing.
    #[arg(long, default_value = "2022-02,2023-02")]
    pub era_boundaries: EraBoundaries,
    /// Zone for local hours, days, months and weeks.
    #[arg(long, default_value = "Europe/London")]
    pub timezone: String,
    /// How timestamps without an offset are read: utc or local.
    #[arg(long, default_value = "utc")]
    pub naive_timestamps: NaiveTimestamps,
    /// Header mapping for non-canonical exports (JSON).
    #[arg(long)]
    pub column_map: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Directory holding one subdirectory per driver bundle.
    pub root: PathBuf,
    /// Directory for the report files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Week convention; only ISO-8601 weeks are supported.
    #[arg(long, default_value = "iso", value_parser = ["iso"])]
    pub weeks: String,
    /// Baseline window, e.g. 2022-01..2022-12.
    #[arg(long)]
    pub cohort_pre: Option<MonthRange>,
    /// Comparison window, same length as the baseline.
    #[arg(long)]
    pub cohort_post: Option<MonthRange>,
    /// RPI CSV with columns month, yoy_pct.
    #[arg(long)]
    pub rpi: Option<PathBuf>,
    /// Month whose prices real figures are expressed in.
    #[arg(long)]
    pub rpi_base: Option<YearMonth>,
    /// Also write CSV tables under OUT/csv.
    #[arg(long)]
    pub csv: bool,
    /// Also write SVG charts under OUT/charts.
    #[arg(long)]
    pub charts: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory holding one subdirectory per driver bundle.
    pub root: PathBuf,
    /// Directory for the year matrix files.
    #[arg(long)]
    pub out: PathBuf,
    /// single_year or cumulative.
    #[arg(long, default_value = "single_year")]
    pub mode: MatrixMode,
    /// Seeds the within-year train/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of each year held out when a year is tested on itself.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct AnonArgs {
    /// Directory holding one subdirectory per driver bundle.
    pub root: PathBuf,
    /// Directory for the anonymised bundles; must lie outside ROOT.
    #[arg(long)]
    pub out: PathBuf,
    /// Read the salt from this file instead of the environment.
    #[arg(long)]
    pub salt_file: Option<PathBuf>,
    /// Environment variable holding the salt.
    #[arg(long, default_value = gigaudit::anonymize::DEFAULT_SALT_ENV)]
    pub salt_env: String,
    /// Fields to strip, comma separated; defaults to every direct identifier.
    #[arg(long, value_delimiter = ',')]
    pub strip: Option<Vec<String>>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}
