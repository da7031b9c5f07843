//! Cross-year pay-predictability run over a bundle root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{process_all, to_canonical_json, write_file, AuditConfig, AuditError};
use crate::linkage::LinkedTrip;
use crate::predict::{year_matrix, FeatureSchema, MatrixMode, YearDataset, YearMatrix, YearMatrixConfig};

pub const MATRIX_CSV: &str = "year_matrix.csv";
pub const MATRIX_JSON: &str = "year_matrix.json";

#[derive(Clone, Debug, Default)]
pub struct PredictConfig {
    pub audit: AuditConfig,
    pub matrix: YearMatrixConfig,
    pub schema: FeatureSchema,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub mode: MatrixMode,
    pub seed: u64,
    pub test_fraction: f64,
    pub features: Vec<String>,
    pub rows_per_year: BTreeMap<i32, usize>,
    pub matrix: YearMatrix,
}

#[derive(Clone, Debug)]
pub struct PredictRun {
    pub report: PredictReport,
}

pub fn run_predict(root: &Path, config: &PredictConfig) -> Result<PredictRun, AuditError> {
    let (bundles, _failures) = process_all(root, &config.audit)?;
    let linked: Vec<LinkedTrip> = bundles.into_iter().flat_map(|b| b.link.linked).collect();
    let data = YearDataset::<f64>::from_linked(&linked, &config.schema, &config.audit.link.calendar);
    let matrix = year_matrix(&data, &config.matrix)?;
    Ok(PredictRun {
        report: PredictReport {
            mode: config.matrix.mode,
            seed: config.matrix.seed,
            test_fraction: config.matrix.test_fraction,
            features: data.feature_names.clone(),
            rows_per_year: data.years.iter().map(|(&y, (_, t))| (y, t.len())).collect(),
            matrix,
        },
    })
}

pub fn write_predict(run: &PredictRun, out: &Path) -> Result<Vec<PathBuf>, AuditError> {
    std::fs::create_dir_all(out).map_err(|e| AuditError::Io(out.to_path_buf(), e))?;
    let csv = out.join(MATRIX_CSV);
    write_file(&csv, &run.report.matrix.to_csv())?;
    let json = out.join(MATRIX_JSON);
    write_file(&json, &to_canonical_json(&run.report))?;
    Ok(vec![csv, json])
}
