//! Whole-run orchestration over a directory of driver bundles.
//!
//! Every bundle goes through load, normalise, link, segment reconstruction
//! and weekly aggregation on its own, in parallel. The pooled report is then
//! assembled on one thread from the per-bundle results in directory-name
//! order, so the output does not depend on the number of worker threads.

mod charts;
mod export;
mod json;
mod predict;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{load_bundle, normalize, ColumnMap, IngestReport, LoadOptions, NormalizedBundle};
use crate::linkage::{link, LinkConfig, LinkResult};
use crate::metrics::{weekly_rows, MonthRange, ShareBins, WeeklyPayRow};
use crate::model::{RpiSeries, YearMonth};
use crate::predict::PredictError;
use crate::worktime::{build_segments, SegmentBuild};

pub use charts::write_charts;
pub use export::write_csv_exports;
pub use json::{round_significant, to_canonical_json};
pub use predict::{run_predict, write_predict, PredictConfig, PredictReport, PredictRun};
pub use report::{
    build_report, AcceptanceSection, AuditReport, CohortSection, DriverLinkage, EraSemantics, GroupDensity,
    IngestSummary, LinkageSummary, Meta, PayRates, PaySection, RealPay, SurplusSection, TakeRateSection,
    UtilisationMonth, UtilisationSection,
};

pub const REPORT_FILE: &str = "audit_report.json";
pub const QUARANTINE_FILE: &str = "quarantine_report.json";
pub const LINKAGE_FILE: &str = "linkage_report.json";

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("cannot read bundle root {0}: {1}")]
    Root(PathBuf, std::io::Error),
    #[error("no valid bundles under {0}")]
    NoValidBundles(PathBuf),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("writing {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("csv export: {0}")]
    Csv(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub link: LinkConfig,
    pub column_map: ColumnMap,
    pub load: LoadOptions,
    pub cohort_pre: Option<MonthRange>,
    pub cohort_post: Option<MonthRange>,
    pub rpi: Option<RpiSeries>,
    /// Month whose pounds inflation-adjusted figures are expressed in;
    /// defaults to the last month with data.
    pub rpi_base: Option<YearMonth>,
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
    pub share_bins: ShareBins,
    /// Reported as the fraction of trips (or drivers) at or above this share.
    pub share_threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            link: LinkConfig::default(),
            column_map: ColumnMap::default(),
            load: LoadOptions::default(),
            cohort_pre: None,
            cohort_post: None,
            rpi: None,
            rpi_base: None,
            jobs: 0,
            share_bins: ShareBins::default(),
            share_threshold: 0.75,
        }
    }
}

/// Everything derived from one bundle.
#[derive(Clone, Debug)]
pub struct BundleOutcome {
    /// Directory name under the root.
    pub name: String,
    pub bundle: NormalizedBundle,
    pub ingest: IngestReport,
    pub link: LinkResult,
    pub segments: SegmentBuild,
    pub weeks: Vec<WeeklyPayRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFailure {
    pub bundle: String,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct AuditRun {
    pub bundles: Vec<BundleOutcome>,
    pub failures: Vec<BundleFailure>,
    pub report: AuditReport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OutputOptions {
    pub csv: bool,
    pub charts: bool,
}

/// Subdirectories of `root`, sorted by name.
pub fn discover_bundles(root: &Path) -> Result<Vec<PathBuf>, AuditError> {
    let entries = std::fs::read_dir(root).map_err(|e| AuditError::Root(root.to_path_buf(), e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| AuditError::Root(root.to_path_buf(), e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn process_bundle(dir: &Path, config: &AuditConfig) -> Result<BundleOutcome, String> {
    let calendar = &config.link.calendar;
    let raw = load_bundle(dir, &config.column_map, &config.load).map_err(|e| e.to_string())?;
    let (bundle, ingest) = normalize(&raw, calendar);
    let link = link(&bundle.trips, &bundle.payments, &config.link);
    let segments = build_segments(&bundle.driver_id, &bundle.sessions, &bundle.trips);
    let weeks =
        weekly_rows(&bundle.driver_id, &bundle.payments, &segments.segments, calendar).map_err(|e| e.to_string())?;
    Ok(BundleOutcome {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        bundle,
        ingest,
        link,
        segments,
        weeks,
    })
}

/// Processes every bundle under `root` on a pool of `config.jobs` threads.
/// Bundles that fail to load are logged and listed, not fatal.
pub fn process_all(root: &Path, config: &AuditConfig) -> Result<(Vec<BundleOutcome>, Vec<BundleFailure>), AuditError> {
    let dirs = discover_bundles(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| AuditError::Pool(e.to_string()))?;
    let results: Vec<(PathBuf, Result<BundleOutcome, String>)> = pool.install(|| {
        dirs.par_iter()
            .map(|d| (d.clone(), process_bundle(d, config)))
            .collect()
    });

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (dir, r) in results {
        match r {
            Ok(b) => {
                log::info!(
                    "{}: {} trips, {} payments",
                    dir.display(),
                    b.bundle.trips.len(),
                    b.bundle.payments.len()
                );
                ok.push(b);
            }
            Err(error) => {
                log::warn!("skipping bundle {}: {error}", dir.display());
                failures.push(BundleFailure {
                    bundle: dir
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    error,
                });
            }
        }
    }
    if ok.is_empty() {
        return Err(AuditError::NoValidBundles(root.to_path_buf()));
    }
    Ok((ok, failures))
}

pub fn run_audit(root: &Path, config: &AuditConfig) -> Result<AuditRun, AuditError> {
    let (bundles, failures) = process_all(root, config)?;
    let report = build_report(&bundles, &failures, config);
    Ok(AuditRun {
        bundles,
        failures,
        report,
    })
}

#[derive(Serialize)]
struct QuarantineFile<'a> {
    bundles: Vec<&'a IngestReport>,
    failed: &'a [BundleFailure],
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), AuditError> {
    std::fs::write(path, contents).map_err(|e| AuditError::Io(path.to_path_buf(), e))
}

/// Writes the report, the quarantine and linkage side reports, and any
/// optional exports into `out`. Returns the paths written.
pub fn write_audit(run: &AuditRun, out: &Path, options: OutputOptions) -> Result<Vec<PathBuf>, AuditError> {
    std::fs::create_dir_all(out).map_err(|e| AuditError::Io(out.to_path_buf(), e))?;
    let mut written = Vec::new();

    let path = out.join(REPORT_FILE);
    write_file(&path, &to_canonical_json(&run.report))?;
    written.push(path);

    let quarantine = QuarantineFile {
        bundles: run.bundles.iter().map(|b| &b.ingest).collect(),
        failed: &run.failures,
    };
    let path = out.join(QUARANTINE_FILE);
    write_file(&path, &to_canonical_json(&quarantine))?;
    written.push(path);

    let linkage: Vec<DriverLinkage> = run.bundles.iter().map(DriverLinkage::of).collect();
    let path = out.join(LINKAGE_FILE);
    write_file(&path, &to_canonical_json(&linkage))?;
    written.push(path);

    if options.csv {
        written.extend(write_csv_exports(run, &out.join("csv"))?);
    }
    if options.charts {
        written.extend(write_charts(&run.report, &out.join("charts"))?);
    }
    Ok(written)
}
