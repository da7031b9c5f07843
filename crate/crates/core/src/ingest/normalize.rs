use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::load::{RawBundle, RawRow};
use super::{IngestReport, NormalizedBundle, TableKind};
use crate::model::{
    AppSession, Calendar, Currency, DispatchOffer, DriverId, DriverProfile, ModelError, Money, PaymentCategory,
    PaymentEvent, Timestamp, TripRecord, TripStatus,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows_in: usize,
    pub normalized: usize,
    pub deduplicated: usize,
    pub quarantined: usize,
    /// Structurally malformed rows dropped at load time (not part of `rows_in`).
    pub malformed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub table: TableKind,
    pub line: u64,
    pub reason: String,
}

/// Converts raw rows to typed records.
///
/// Exact duplicate rows (equal on every resolved field) are collapsed to
/// their first occurrence. Rows that fail to parse or violate a record
/// invariant are quarantined with a reason. Nothing is dropped silently:
/// `rows_in = normalized + deduplicated + quarantined` for every table.
pub fn normalize(raw: &RawBundle, calendar: &Calendar) -> (NormalizedBundle, IngestReport) {
    let mut report = IngestReport {
        driver_id: raw.driver_id.to_string(),
        skipped_files: raw.skipped.clone(),
        ..IngestReport::default()
    };
    let mut bundle = NormalizedBundle {
        driver_id: raw.driver_id.clone(),
        trips: Vec::new(),
        payments: Vec::new(),
        dispatches: Vec::new(),
        sessions: Vec::new(),
        profile: None,
        stripped: BTreeSet::new(),
        tables: raw.tables.keys().copied().collect(),
    };
    let parser = RowParser {
        calendar,
        driver: &raw.driver_id,
    };

    for (&kind, table) in &raw.tables {
        let mut stats = TableReport {
            rows_in: table.rows.len(),
            malformed: table.malformed.len(),
            ..TableReport::default()
        };
        report.malformed.extend(table.malformed.iter().cloned());

        let mut seen: HashSet<&BTreeMap<String, String>> = HashSet::new();
        for row in &table.rows {
            if !seen.insert(&row.values) {
                stats.deduplicated += 1;
                continue;
            }
            let outcome = match kind {
                TableKind::Trips => parser.trip(row).map(|t| bundle.trips.push(t)),
                TableKind::Payments => parser.payment(row).map(|p| bundle.payments.push(p)),
                TableKind::Dispatches => parser.dispatch(row).map(|d| bundle.dispatches.push(d)),
                TableKind::Sessions => parser.session(row).map(|s| bundle.sessions.push(s)),
                TableKind::Profile => {
                    if bundle.profile.is_some() {
                        Err("extra profile row".to_string())
                    } else {
                        parser.profile(row).map(|p| bundle.profile = Some(p))
                    }
                }
            };
            match outcome {
                Ok(()) => stats.normalized += 1,
                Err(reason) => {
                    stats.quarantined += 1;
                    report.quarantine.push(QuarantineEntry {
                        table: kind,
                        line: row.line,
                        reason,
                    });
                }
            }
        }
        report.tables.insert(kind, stats);
    }

    if let Some(profile) = bundle.profile.as_mut() {
        if profile.first_trip_ts == Timestamp(i64::MIN) {
            profile.first_trip_ts = bundle.trips.iter().map(|t| t.request_ts).min().unwrap_or(Timestamp(0));
        }
    }

    (bundle, report)
}

struct RowParser<'a> {
    calendar: &'a Calendar,
    driver: &'a DriverId,
}

fn describe(e: ModelError) -> String {
    match e {
        ModelError::InvertedTimestamps => "inverted timestamps".to_string(),
        ModelError::InvalidMoney(v) => format!("malformed money {v:?}"),
        other => other.to_string(),
    }
}

impl RowParser<'_> {
    fn driver(&self, row: &RawRow) -> Result<DriverId, String> {
        match row.get("driver_id") {
            Some(id) if id != self.driver.as_str() => Err(format!("foreign driver_id {id:?}")),
            _ => Ok(self.driver.clone()),
        }
    }

    fn required<'r>(&self, row: &'r RawRow, field: &str) -> Result<&'r str, String> {
        row.get(field).ok_or_else(|| format!("missing {field}"))
    }

    fn ts(&self, row: &RawRow, field: &str) -> Result<Timestamp, String> {
        let v = self.required(row, field)?;
        self.calendar.parse_timestamp(v).map_err(describe)
    }

    fn opt_ts(&self, row: &RawRow, field: &str) -> Result<Option<Timestamp>, String> {
        row.get(field)
            .map(|v| self.calendar.parse_timestamp(v).map_err(describe))
            .transpose()
    }

    fn currency(&self, row: &RawRow) -> Result<Currency, String> {
        row.get("currency")
            .map(|c| c.parse().map_err(describe))
            .transpose()
            .map(|c| c.unwrap_or_default())
    }

    fn opt_text(row: &RawRow, field: &str) -> Option<String> {
        row.get(field).map(str::to_string)
    }

    fn trip(&self, row: &RawRow) -> Result<TripRecord, String> {
        let currency = self.currency(row)?;
        let distance_raw = self.required(row, "distance_miles")?;
        let distance_miles: f64 = distance_raw
            .parse()
            .map_err(|_| format!("malformed distance {distance_raw:?}"))?;
        let trip = TripRecord {
            driver_id: self.driver(row)?,
            request_ts: self.ts(row, "request_ts")?,
            accept_ts: self.opt_ts(row, "accept_ts")?,
            pickup_ts: self.opt_ts(row, "pickup_ts")?,
            dropoff_ts: self.opt_ts(row, "dropoff_ts")?,
            cancel_ts: self.opt_ts(row, "cancel_ts")?,
            distance_miles,
            status: self.required(row, "status")?.parse::<TripStatus>().map_err(describe)?,
            original_fare: row
                .get("original_fare")
                .map(|v| Money::parse_major(v, currency).map_err(describe))
                .transpose()?,
            origin_tag: row.get("origin_tag").unwrap_or("").to_string(),
            dest_tag: row.get("dest_tag").unwrap_or("").to_string(),
            product: row.get("product").unwrap_or("").to_string(),
            pickup_address: Self::opt_text(row, "pickup_address"),
            dropoff_address: Self::opt_text(row, "dropoff_address"),
            vehicle_plate: Self::opt_text(row, "vehicle_plate"),
        };
        trip.validate().map_err(describe)?;
        Ok(trip)
    }

    fn payment(&self, row: &RawRow) -> Result<PaymentEvent, String> {
        let currency = self.currency(row)?;
        Ok(PaymentEvent {
            driver_id: self.driver(row)?,
            ts: self.ts(row, "ts")?,
            category: PaymentCategory::classify(row.get("category").unwrap_or("")),
            amount: Money::parse_major(self.required(row, "amount")?, currency).map_err(describe)?,
            memo: Self::opt_text(row, "memo"),
        })
    }

    fn dispatch(&self, row: &RawRow) -> Result<DispatchOffer, String> {
        let raw = self.required(row, "accepted")?;
        let accepted = match raw.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "y" | "accepted" => true,
            "false" | "0" | "no" | "n" | "declined" | "rejected" => false,
            _ => return Err(format!("malformed accepted flag {raw:?}")),
        };
        Ok(DispatchOffer {
            driver_id: self.driver(row)?,
            offered_ts: self.ts(row, "offered_ts")?,
            accepted,
        })
    }

    fn session(&self, row: &RawRow) -> Result<AppSession, String> {
        let s = AppSession {
            driver_id: self.driver(row)?,
            login_ts: self.ts(row, "login_ts")?,
            logout_ts: self.ts(row, "logout_ts")?,
        };
        s.validate().map_err(describe)?;
        Ok(s)
    }

    fn profile(&self, row: &RawRow) -> Result<DriverProfile, String> {
        Ok(DriverProfile {
            driver_id: self.driver(row)?,
            gender: row.get("gender").and_then(|g| g.parse().ok()),
            age_band: row.get("age_band").map(|a| a.parse().map_err(describe)).transpose()?,
            // resolved from the trips after all tables are read
            first_trip_ts: self.opt_ts(row, "first_trip_ts")?.unwrap_or(Timestamp(i64::MIN)),
            name: Self::opt_text(row, "name"),
            email: Self::opt_text(row, "email"),
        })
    }
}
