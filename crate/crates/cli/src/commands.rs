use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use gigaudit::anonymize::{default_policy, parse_policy, pseudonymize, strip_fields, Salt};
use gigaudit::audit::{
    discover_bundles, run_audit, run_predict, write_audit, write_predict, AuditConfig, AuditError, OutputOptions,
    PredictConfig,
};
use gigaudit::ingest::{load_bundle, normalize, write_bundle, ColumnMap};
use gigaudit::linkage::LinkConfig;
use gigaudit::model::{Calendar, RpiSeries};
use gigaudit::predict::{PredictError, YearMatrixConfig};
use gigaudit::synthgen::{generate, SynthError};

use crate::args::{AnonArgs, AuditArgs, PipelineArgs, PredictArgs, SynthArgs};

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NO_DATA: u8 = 3;
pub const EXIT_SALT: u8 = 4;

trait ExitCode<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitCode<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn config_error(msg: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: anyhow!(msg),
    }
}

fn audit_failure(e: AuditError) -> Failure {
    let code = match &e {
        AuditError::Root(..)
        | AuditError::NoValidBundles(_)
        | AuditError::Predict(PredictError::InsufficientYears(_)) => EXIT_NO_DATA,
        _ => EXIT_FAILURE,
    };
    Failure { code, error: e.into() }
}

fn audit_config(p: &PipelineArgs) -> Result<AuditConfig, Failure> {
    if p.link_window_seconds < 0 || p.link_skew_seconds < 0 {
        return Err(config_error("link window and skew must be non-negative".into()));
    }
    let calendar = Calendar::from_zone_name(&p.timezone, p.naive_timestamps).exit(EXIT_CONFIG)?;
    let column_map = match &p.column_map {
        Some(path) => ColumnMap::from_path(path).exit(EXIT_CONFIG)?,
        None => ColumnMap::default(),
    };
    Ok(AuditConfig {
        link: LinkConfig {
            window_seconds: p.link_window_seconds,
            skew_seconds: p.link_skew_seconds,
            eras: p.era_boundaries,
            calendar,
        },
        column_map,
        jobs: p.jobs,
        ..AuditConfig::default()
    })
}

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let cfg = gigaudit::synthgen::GenConfig::from_path(&a.config).exit(EXIT_CONFIG)?;
    let truth = generate(&cfg, &a.out).map_err(|e| {
        let code = match e {
            SynthError::InvalidConfig(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Failure { code, error: e.into() }
    })?;
    log::info!("wrote {} driver bundles to {}", truth.drivers.len(), a.out.display());
    Ok(())
}

pub fn audit(a: &AuditArgs) -> Result<(), Failure> {
    let mut cfg = audit_config(&a.pipeline)?;
    match (a.cohort_pre, a.cohort_post) {
        (Some(pre), Some(post)) => {
            if pre.overlaps(&post) {
                return Err(config_error(format!("cohort windows {pre} and {post} overlap")));
            }
            if pre.len() != post.len() {
                return Err(config_error(format!(
                    "cohort windows {pre} and {post} differ in length"
                )));
            }
            cfg.cohort_pre = Some(pre);
            cfg.cohort_post = Some(post);
        }
        (None, None) => {}
        _ => {
            return Err(config_error(
                "--cohort-pre and --cohort-post must be given together".into(),
            ))
        }
    }
    if let Some(path) = &a.rpi {
        let file = std::fs::File::open(path)
            .with_context(|| format!("opening RPI file {}", path.display()))
            .exit(EXIT_CONFIG)?;
        cfg.rpi = Some(RpiSeries::from_csv_reader(file).exit(EXIT_CONFIG)?);
    }
    cfg.rpi_base = a.rpi_base;

    let run = run_audit(&a.root, &cfg).map_err(audit_failure)?;
    let written = write_audit(
        &run,
        &a.out,
        OutputOptions {
            csv: a.csv,
            charts: a.charts,
        },
    )
    .map_err(audit_failure)?;
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<(), Failure> {
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(config_error(format!(
            "test fraction {} must lie in (0, 1)",
            a.test_fraction
        )));
    }
    let cfg = PredictConfig {
        audit: audit_config(&a.pipeline)?,
        matrix: YearMatrixConfig {
            mode: a.mode,
            seed: a.seed,
            test_fraction: a.test_fraction,
        },
        ..PredictConfig::default()
    };
    let run = run_predict(&a.root, &cfg).map_err(audit_failure)?;
    for p in write_predict(&run, &a.out).map_err(audit_failure)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    // resolve symlinks for the part of the path that exists
    abs.canonicalize().unwrap_or(abs)
}

pub fn anon(a: &AnonArgs) -> Result<(), Failure> {
    let salt = Salt::resolve(&a.salt_env, a.salt_file.as_deref()).exit(EXIT_SALT)?;
    let policy = match &a.strip {
        Some(names) => parse_policy(names).exit(EXIT_CONFIG)?,
        None => default_policy(),
    };
    let (root, out) = (absolute(&a.root), absolute(&a.out));
    if out.starts_with(&root) {
        return Err(config_error(format!(
            "output {} lies inside the input root; refusing to write in place",
            out.display()
        )));
    }
    let cfg = audit_config(&a.pipeline)?;
    let dirs = discover_bundles(&a.root).map_err(audit_failure)?;
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .exit(EXIT_FAILURE)?;

    let mut written = 0usize;
    for dir in &dirs {
        let raw = match load_bundle(dir, &cfg.column_map, &cfg.load) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping bundle {}: {e}", dir.display());
                continue;
            }
        };
        let (bundle, report) = normalize(&raw, &cfg.link.calendar);
        if report.total_quarantined() > 0 {
            log::warn!(
                "{}: {} rows quarantined and not copied",
                dir.display(),
                report.total_quarantined()
            );
        }
        let clean = strip_fields(&pseudonymize(&bundle, &salt), &policy);
        let target = a.out.join(clean.driver_id.as_str());
        if target.exists() {
            log::warn!("{} already exists and is overwritten", target.display());
        }
        write_bundle(&target, &clean)
            .with_context(|| format!("writing {}", target.display()))
            .exit(EXIT_FAILURE)?;
        written += 1;
    }
    if written == 0 {
        return Err(Failure {
            code: EXIT_NO_DATA,
            error: anyhow!("no valid bundles under {}", a.root.display()),
        });
    }
    log::info!("wrote {written} anonymised bundles to {}", a.out.display());
    Ok(())
}
