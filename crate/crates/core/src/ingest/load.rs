use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ColumnMap, IngestError, TableKind};
use crate::model::DriverId;

#[derive(Clone, Debug, PartialEq)]
pub struct LoadOptions {
    /// Tables whose absence aborts the load.
    pub required_tables: Vec<TableKind>,
    /// Fraction of structurally malformed rows above which a table is rejected.
    pub malformed_limit: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            required_tables: vec![TableKind::Trips, TableKind::Payments],
            malformed_limit: 0.05,
        }
    }
}

/// One data row, keyed by canonical field name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRow {
    /// 1-based line of the record in its file (header is line 1).
    pub line: u64,
    pub values: BTreeMap<String, String>,
}

impl RawRow {
    pub fn get(&self, field: &str) -> Option<&str> {
        self.values.get(field).map(|s| s.trim()).filter(|s| !s.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub table: TableKind,
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub file: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub kind: TableKind,
    pub source: PathBuf,
    /// Canonical fields that were resolved from the header.
    pub columns: Vec<String>,
    pub rows: Vec<RawRow>,
    pub malformed: Vec<MalformedRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawBundle {
    pub driver_id: DriverId,
    pub tables: BTreeMap<TableKind, RawTable>,
    pub skipped: Vec<SkippedFile>,
}

/// Parses every recognised table file in a bundle directory.
///
/// The driver id is taken from the profile row when present, otherwise from
/// the directory name. Files the column map does not recognise are listed in
/// the skip report.
pub fn load_bundle(dir: &Path, map: &ColumnMap, options: &LoadOptions) -> Result<RawBundle, IngestError> {
    let io_err = |e| IngestError::Io(dir.to_path_buf(), e);
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err)?;
    entries.sort();

    let mut tables = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in entries {
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n.to_string(),
            None => continue,
        };
        if !path.is_file() {
            continue;
        }
        match map.table_for_file(&name) {
            Some(kind) if tables.contains_key(&kind) => skipped.push(SkippedFile {
                file: name,
                reason: format!("duplicate file for table {kind}"),
            }),
            Some(kind) => {
                let table = read_table(&path, kind, map)?;
                check_malformed(&table, options.malformed_limit)?;
                tables.insert(kind, table);
            }
            None => skipped.push(SkippedFile {
                file: name,
                reason: "unrecognised file".to_string(),
            }),
        }
    }

    if tables.is_empty() {
        return Err(IngestError::NoTables(dir.to_path_buf()));
    }
    for required in &options.required_tables {
        if !tables.contains_key(required) {
            return Err(IngestError::MissingTable(*required));
        }
    }

    let driver_id = tables
        .get(&TableKind::Profile)
        .and_then(|t| t.rows.first())
        .and_then(|r| r.get("driver_id"))
        .map(DriverId::new)
        .unwrap_or_else(|| DriverId::new(dir.file_name().and_then(|n| n.to_str()).unwrap_or("unknown")));

    Ok(RawBundle {
        driver_id,
        tables,
        skipped,
    })
}

fn read_table(path: &Path, kind: TableKind, map: &ColumnMap) -> Result<RawTable, IngestError> {
    let csv_err = |e| IngestError::Csv(path.to_path_buf(), e);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(csv_err)?;
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let resolved = map.resolve(kind, &headers)?;

    let mut rows = Vec::new();
    let mut malformed = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                let values = resolved
                    .iter()
                    .map(|&(field, idx)| (field.to_string(), record.get(idx).unwrap_or("").to_string()))
                    .collect();
                rows.push(RawRow { line, values });
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                // I/O errors end the file; record-level errors are per row
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(csv_err(e));
                }
                malformed.push(MalformedRow {
                    table: kind,
                    line,
                    reason: e.to_string(),
                });
            }
        }
    }

    Ok(RawTable {
        kind,
        source: path.to_path_buf(),
        columns: resolved.iter().map(|(f, _)| f.to_string()).collect(),
        rows,
        malformed,
    })
}

fn check_malformed(table: &RawTable, limit: f64) -> Result<(), IngestError> {
    let total = table.rows.len() + table.malformed.len();
    if total > 0 && table.malformed.len() as f64 > limit * total as f64 {
        return Err(IngestError::MalformedRow {
            table: table.kind,
            malformed: table.malformed.len(),
            total,
            limit: limit * 100.0,
        });
    }
    Ok(())
}
