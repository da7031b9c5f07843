//! Reading per-driver export bundles.
//!
//! A bundle is a directory holding one CSV per table. [`load_bundle`] resolves
//! each file's headers through a [`ColumnMap`] into canonical field names and
//! keeps the raw strings; [`normalize`] turns those into typed records,
//! deduplicating exact repeats and quarantining rows that fail validation.
//! Every input row ends up in exactly one of: normalized, deduplicated,
//! quarantined, or (at load time) malformed.

mod columns;
mod fare;
mod load;
mod normalize;
mod write;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AppSession, DispatchOffer, DriverId, DriverProfile, PaymentEvent, TripRecord};

pub use columns::{ColumnMap, TableMapping};
pub use fare::{detect_fare_semantics, fare_semantics_for, FareSemantics, FareSemanticsReport};
pub use load::{load_bundle, LoadOptions, MalformedRow, RawBundle, RawRow, RawTable, SkippedFile};
pub use normalize::{normalize, QuarantineEntry, TableReport};
pub use write::{serialize_bundle, write_bundle};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bundle directory {0} is not readable: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("no recognised table files in {0}")]
    NoTables(PathBuf),
    #[error("required table {0} is missing")]
    MissingTable(TableKind),
    #[error("table {table}: required column {field:?} not found in header")]
    MissingColumn { table: TableKind, field: String },
    #[error("table {table}: {malformed} of {total} rows malformed (limit {limit:.1}%)")]
    MalformedRow {
        table: TableKind,
        malformed: usize,
        total: usize,
        limit: f64,
    },
    #[error("column map: {0}")]
    ColumnMap(String),
    #[error("csv error in {0}: {1}")]
    Csv(PathBuf, csv::Error),
}

/// The canonical tables of a bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Trips,
    Payments,
    Dispatches,
    Sessions,
    Profile,
}

impl TableKind {
    pub const ALL: [TableKind; 5] = [
        TableKind::Trips,
        TableKind::Payments,
        TableKind::Dispatches,
        TableKind::Sessions,
        TableKind::Profile,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TableKind::Trips => "trips",
            TableKind::Payments => "payments",
            TableKind::Dispatches => "dispatches",
            TableKind::Sessions => "sessions",
            TableKind::Profile => "profile",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.as_str())
    }

    /// Canonical field names, in serialisation order.
    pub fn fields(&self) -> &'static [&'static str] {
        match self {
            TableKind::Trips => &[
                "driver_id",
                "request_ts",
                "accept_ts",
                "pickup_ts",
                "dropoff_ts",
                "cancel_ts",
                "status",
                "distance_miles",
                "original_fare",
                "currency",
                "origin_tag",
                "dest_tag",
                "product",
                "pickup_address",
                "dropoff_address",
                "vehicle_plate",
            ],
            TableKind::Payments => &["driver_id", "ts", "category", "amount", "currency", "memo"],
            TableKind::Dispatches => &["driver_id", "offered_ts", "accepted"],
            TableKind::Sessions => &["driver_id", "login_ts", "logout_ts"],
            TableKind::Profile => &["driver_id", "gender", "age_band", "first_trip_ts", "name", "email"],
        }
    }

    /// Fields whose column must be present in the file header.
    pub fn required_fields(&self) -> &'static [&'static str] {
        match self {
            TableKind::Trips => &["request_ts", "status", "distance_miles"],
            TableKind::Payments => &["ts", "category", "amount"],
            TableKind::Dispatches => &["offered_ts", "accepted"],
            TableKind::Sessions => &["login_ts", "logout_ts"],
            TableKind::Profile => &[],
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableKind {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableKind::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| IngestError::ColumnMap(format!("unknown table {s:?}")))
    }
}

/// Optional fields that a strip policy may remove.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrippableField {
    Name,
    Email,
    PickupAddress,
    DropoffAddress,
    VehiclePlate,
    Memo,
    OriginTag,
    DestTag,
    Gender,
    AgeBand,
}

impl StrippableField {
    pub const ALL: [StrippableField; 10] = [
        StrippableField::Name,
        StrippableField::Email,
        StrippableField::PickupAddress,
        StrippableField::DropoffAddress,
        StrippableField::VehiclePlate,
        StrippableField::Memo,
        StrippableField::OriginTag,
        StrippableField::DestTag,
        StrippableField::Gender,
        StrippableField::AgeBand,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrippableField::Name => "name",
            StrippableField::Email => "email",
            StrippableField::PickupAddress => "pickup_address",
            StrippableField::DropoffAddress => "dropoff_address",
            StrippableField::VehiclePlate => "vehicle_plate",
            StrippableField::Memo => "memo",
            StrippableField::OriginTag => "origin_tag",
            StrippableField::DestTag => "dest_tag",
            StrippableField::Gender => "gender",
            StrippableField::AgeBand => "age_band",
        }
    }

    pub fn table(&self) -> TableKind {
        match self {
            StrippableField::Name | StrippableField::Email | StrippableField::Gender | StrippableField::AgeBand => {
                TableKind::Profile
            }
            StrippableField::Memo => TableKind::Payments,
            _ => TableKind::Trips,
        }
    }

    pub fn parse(s: &str) -> Option<StrippableField> {
        StrippableField::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

/// Typed records of one driver's bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBundle {
    pub driver_id: DriverId,
    pub trips: Vec<TripRecord>,
    pub payments: Vec<PaymentEvent>,
    pub dispatches: Vec<DispatchOffer>,
    pub sessions: Vec<AppSession>,
    pub profile: Option<DriverProfile>,
    /// Fields removed by a strip policy; their columns are omitted on write.
    #[serde(default)]
    pub stripped: BTreeSet<StrippableField>,
    /// Tables present in the source bundle.
    #[serde(default)]
    pub tables: BTreeSet<TableKind>,
}

/// Per-bundle ingest accounting, emitted as JSON next to audit outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub driver_id: String,
    pub skipped_files: Vec<SkippedFile>,
    pub tables: BTreeMap<TableKind, TableReport>,
    pub malformed: Vec<MalformedRow>,
    pub quarantine: Vec<QuarantineEntry>,
}

impl IngestReport {
    pub fn total_quarantined(&self) -> usize {
        self.tables.values().map(|t| t.quarantined).sum()
    }

    pub fn total_deduplicated(&self) -> usize {
        self.tables.values().map(|t| t.deduplicated).sum()
    }
}
