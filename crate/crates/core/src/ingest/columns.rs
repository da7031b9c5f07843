use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, TableKind};

/// How one table is located and how its headers map to canonical fields.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMapping {
    /// Candidate file names, tried case-insensitively.
    pub files: Vec<String>,
    /// Canonical field → candidate source headers, first match wins.
    pub columns: BTreeMap<String, Vec<String>>,
}

/// Header resolution rules for every table, loadable from JSON.
///
/// Tables or fields absent from a JSON map fall back to the canonical names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub tables: BTreeMap<TableKind, TableMapping>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        let tables = TableKind::ALL
            .into_iter()
            .map(|t| (t, TableMapping::canonical(t)))
            .collect();
        ColumnMap { tables }
    }
}

impl TableMapping {
    pub fn canonical(table: TableKind) -> Self {
        TableMapping {
            files: vec![table.file_name()],
            columns: table
                .fields()
                .iter()
                .map(|f| (f.to_string(), vec![f.to_string()]))
                .collect(),
        }
    }
}

impl ColumnMap {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let parsed: ColumnMap = serde_json::from_str(text).map_err(|e| IngestError::ColumnMap(e.to_string()))?;
        let mut merged = ColumnMap::default();
        for (table, mapping) in parsed.tables {
            let slot = merged.tables.get_mut(&table).expect("all tables present");
            if !mapping.files.is_empty() {
                slot.files = mapping.files;
            }
            for (field, candidates) in mapping.columns {
                if !table.fields().contains(&field.as_str()) {
                    return Err(IngestError::ColumnMap(format!(
                        "table {table} has no canonical field {field:?}"
                    )));
                }
                slot.columns.insert(field, candidates);
            }
        }
        merged.validate()?;
        Ok(merged)
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io(path.to_path_buf(), e))?;
        ColumnMap::from_json(&text)
    }

    /// Every required field has at least one candidate header.
    pub fn validate(&self) -> Result<(), IngestError> {
        for table in TableKind::ALL {
            let mapping = self
                .tables
                .get(&table)
                .ok_or_else(|| IngestError::ColumnMap(format!("no mapping for table {table}")))?;
            if mapping.files.is_empty() {
                return Err(IngestError::ColumnMap(format!("table {table} has no file names")));
            }
            for field in table.required_fields() {
                let ok = mapping.columns.get(*field).map(|c| !c.is_empty()).unwrap_or(false);
                if !ok {
                    return Err(IngestError::ColumnMap(format!(
                        "table {table}: required field {field:?} has no candidate header"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn table_for_file(&self, file_name: &str) -> Option<TableKind> {
        TableKind::ALL
            .into_iter()
            .find(|t| self.tables[t].files.iter().any(|f| f.eq_ignore_ascii_case(file_name)))
    }

    /// Resolves canonical fields to column positions in `headers`.
    pub fn resolve(&self, table: TableKind, headers: &[String]) -> Result<Vec<(&'static str, usize)>, IngestError> {
        let mapping = &self.tables[&table];
        let norm = |s: &str| s.trim().trim_start_matches('\u{feff}').to_ascii_lowercase();
        let normalized: Vec<String> = headers.iter().map(|h| norm(h)).collect();
        let mut out = Vec::new();
        for &field in table.fields() {
            let candidates = mapping.columns.get(field).map(Vec::as_slice).unwrap_or(&[]);
            let hit = candidates
                .iter()
                .find_map(|c| normalized.iter().position(|h| *h == norm(c)));
            match hit {
                Some(idx) => out.push((field, idx)),
                None if table.required_fields().contains(&field) => {
                    return Err(IngestError::MissingColumn {
                        table,
                        field: field.to_string(),
                    })
                }
                None => {}
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_is_valid() {
        ColumnMap::default().validate().unwrap();
        assert_eq!(ColumnMap::default().table_for_file("TRIPS.csv"), Some(TableKind::Trips));
        assert_eq!(ColumnMap::default().table_for_file("notes.csv"), None);
    }

    #[test]
    fn fallbacks_resolve_in_order() {
        let json = r#"{"tables":{"payments":{"files":["Driver_Payments.csv"],
            "columns":{"ts":["Local Timestamp","ts"],"amount":["Amount (GBP)"]}}}}"#;
        let map = ColumnMap::from_json(json).unwrap();
        assert_eq!(map.table_for_file("driver_payments.csv"), Some(TableKind::Payments));
        let headers: Vec<String> = ["category", "ts", "Amount (GBP)", "Local Timestamp"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let resolved = map.resolve(TableKind::Payments, &headers).unwrap();
        assert!(resolved.contains(&("ts", 3)));
        assert!(resolved.contains(&("amount", 2)));
    }

    #[test]
    fn missing_required_column_is_an_error() {
        let headers = vec!["ts".to_string(), "amount".to_string()];
        let err = ColumnMap::default().resolve(TableKind::Payments, &headers).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { ref field, .. } if field == "category"));
    }

    #[test]
    fn rejects_empty_candidates_and_unknown_fields() {
        let empty = r#"{"tables":{"trips":{"files":[],"columns":{"status":[]}}}}"#;
        assert!(ColumnMap::from_json(empty).is_err());
        let unknown = r#"{"tables":{"trips":{"files":[],"columns":{"colour":["c"]}}}}"#;
        assert!(ColumnMap::from_json(unknown).is_err());
    }
}
