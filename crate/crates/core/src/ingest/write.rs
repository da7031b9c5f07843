use std::collections::BTreeMap;
use std::path::Path;

use super::{NormalizedBundle, StrippableField, TableKind};
use crate::model::{Currency, Timestamp};

fn ts(t: Timestamp) -> String {
    t.to_rfc3339()
}

fn opt_ts(t: Option<Timestamp>) -> String {
    t.map(ts).unwrap_or_default()
}

fn opt(s: &Option<String>) -> String {
    s.clone().unwrap_or_default()
}

/// Serialises a bundle to canonical CSV text, one entry per table the bundle
/// came with. Columns of stripped fields are omitted entirely.
pub fn serialize_bundle(bundle: &NormalizedBundle) -> BTreeMap<TableKind, String> {
    let mut out = BTreeMap::new();
    for &kind in &bundle.tables {
        let columns: Vec<&'static str> = kind
            .fields()
            .iter()
            .copied()
            .filter(|f| {
                StrippableField::parse(f)
                    .map(|sf| !bundle.stripped.contains(&sf))
                    .unwrap_or(true)
            })
            .collect();
        let rows: Vec<BTreeMap<&'static str, String>> = match kind {
            TableKind::Trips => bundle
                .trips
                .iter()
                .map(|t| {
                    BTreeMap::from([
                        ("driver_id", t.driver_id.to_string()),
                        ("request_ts", ts(t.request_ts)),
                        ("accept_ts", opt_ts(t.accept_ts)),
                        ("pickup_ts", opt_ts(t.pickup_ts)),
                        ("dropoff_ts", opt_ts(t.dropoff_ts)),
                        ("cancel_ts", opt_ts(t.cancel_ts)),
                        ("status", t.status.to_string()),
                        ("distance_miles", format!("{}", t.distance_miles)),
                        (
                            "original_fare",
                            t.original_fare.map(|m| m.format_major()).unwrap_or_default(),
                        ),
                        (
                            "currency",
                            t.original_fare.map(|m| m.currency).unwrap_or(Currency::GBP).to_string(),
                        ),
                        ("origin_tag", t.origin_tag.clone()),
                        ("dest_tag", t.dest_tag.clone()),
                        ("product", t.product.clone()),
                        ("pickup_address", opt(&t.pickup_address)),
                        ("dropoff_address", opt(&t.dropoff_address)),
                        ("vehicle_plate", opt(&t.vehicle_plate)),
                    ])
                })
                .collect(),
            TableKind::Payments => bundle
                .payments
                .iter()
                .map(|p| {
                    BTreeMap::from([
                        ("driver_id", p.driver_id.to_string()),
                        ("ts", ts(p.ts)),
                        ("category", p.category.to_string()),
                        ("amount", p.amount.format_major()),
                        ("currency", p.amount.currency.to_string()),
                        ("memo", opt(&p.memo)),
                    ])
                })
                .collect(),
            TableKind::Dispatches => bundle
                .dispatches
                .iter()
                .map(|d| {
                    BTreeMap::from([
                        ("driver_id", d.driver_id.to_string()),
                        ("offered_ts", ts(d.offered_ts)),
                        ("accepted", d.accepted.to_string()),
                    ])
                })
                .collect(),
            TableKind::Sessions => bundle
                .sessions
                .iter()
                .map(|s| {
                    BTreeMap::from([
                        ("driver_id", s.driver_id.to_string()),
                        ("login_ts", ts(s.login_ts)),
                        ("logout_ts", ts(s.logout_ts)),
                    ])
                })
                .collect(),
            TableKind::Profile => bundle
                .profile
                .iter()
                .map(|p| {
                    BTreeMap::from([
                        ("driver_id", p.driver_id.to_string()),
                        ("gender", p.gender.map(|g| g.label().to_string()).unwrap_or_default()),
                        ("age_band", p.age_band.map(|a| a.to_string()).unwrap_or_default()),
                        ("first_trip_ts", ts(p.first_trip_ts)),
                        ("name", opt(&p.name)),
                        ("email", opt(&p.email)),
                    ])
                })
                .collect(),
        };

        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        wtr.write_record(&columns).expect("in-memory write");
        for row in &rows {
            wtr.write_record(columns.iter().map(|c| row.get(c).map(String::as_str).unwrap_or("")))
                .expect("in-memory write");
        }
        let bytes = wtr.into_inner().expect("in-memory flush");
        out.insert(kind, String::from_utf8(bytes).expect("utf-8 input"));
    }
    out
}

/// Writes the canonical bundle files into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, bundle: &NormalizedBundle) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (kind, text) in serialize_bundle(bundle) {
        std::fs::write(dir.join(kind.file_name()), text)?;
    }
    Ok(())
}
