//! Flat CSV tables behind the report, one file per table.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AuditError, AuditRun};
use crate::model::YearMonth;

fn write_rows<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<PathBuf, AuditError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AuditError::Csv(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| AuditError::Csv(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| AuditError::Io(path.to_path_buf(), e))?;
    Ok(path.to_path_buf())
}

#[derive(Serialize)]
struct WeekRow<'a> {
    driver_id: &'a str,
    iso_week: String,
    net_pay: String,
    hours_tribunal: f64,
    hours_platform: f64,
}

#[derive(Serialize)]
struct LinkedRow<'a> {
    driver_id: &'a str,
    request_ts: String,
    dropoff_ts: String,
    era: &'static str,
    product: &'a str,
    earnings_lines: usize,
    driver_total: String,
    rider_fare: String,
    driver_share: Option<f64>,
}

#[derive(Serialize)]
struct MonthPayRow {
    month: YearMonth,
    weeks: usize,
    net_pay: f64,
    hours_tribunal: f64,
    hours_platform: f64,
    per_hour_tribunal: Option<f64>,
    per_hour_platform: Option<f64>,
}

#[derive(Serialize)]
struct UtilRow {
    month: YearMonth,
    driver_days: usize,
    standby: f64,
    en_route: f64,
    on_trip: f64,
}

#[derive(Serialize)]
struct BinRow<'a> {
    era: &'static str,
    label: &'a str,
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct PerMinuteRow<'a> {
    era: &'static str,
    label: &'a str,
    trips: usize,
    minutes: f64,
    driver_per_min: f64,
    platform_per_min: f64,
    fare_per_min: f64,
}

#[derive(Serialize)]
struct SurplusRow {
    month: YearMonth,
    value: Option<f64>,
    status: String,
}

#[derive(Serialize)]
struct CohortRow<'a> {
    driver_id: &'a str,
    pre_rate: f64,
    post_rate: f64,
    pct_change: f64,
    group: String,
}

#[derive(Serialize)]
struct AcceptRow<'a> {
    driver_id: &'a str,
    acceptance_rate: f64,
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// Writes the per-table CSVs into `dir`.
pub fn write_csv_exports(run: &AuditRun, dir: &Path) -> Result<Vec<PathBuf>, AuditError> {
    std::fs::create_dir_all(dir).map_err(|e| AuditError::Io(dir.to_path_buf(), e))?;
    let r = &run.report;
    let mut out = Vec::new();

    out.push(write_rows(
        &dir.join("weekly_pay.csv"),
        run.bundles.iter().flat_map(|b| {
            b.weeks.iter().map(|w| WeekRow {
                driver_id: w.driver_id.as_str(),
                iso_week: w.iso_week.to_string(),
                net_pay: w.net_pay.format_major(),
                hours_tribunal: w.hours_tribunal,
                hours_platform: w.hours_platform,
            })
        }),
    )?);

    out.push(write_rows(
        &dir.join("linked_trips.csv"),
        run.bundles.iter().flat_map(|b| {
            b.link.linked.iter().map(|l| LinkedRow {
                driver_id: l.trip.driver_id.as_str(),
                request_ts: l.trip.request_ts.to_rfc3339(),
                dropoff_ts: l.trip.dropoff_ts.map(|t| t.to_rfc3339()).unwrap_or_default(),
                era: l.era.as_str(),
                product: &l.trip.product,
                earnings_lines: l.earnings.len(),
                driver_total: l.driver_total.format_major(),
                rider_fare: l.rider_fare.map(|f| f.format_major()).unwrap_or_default(),
                driver_share: l.driver_share,
            })
        }),
    )?);

    out.push(write_rows(
        &dir.join("monthly_pay.csv"),
        r.pay.monthly.iter().map(|(&month, p)| MonthPayRow {
            month,
            weeks: p.weeks,
            net_pay: p.net_pay,
            hours_tribunal: p.hours_tribunal,
            hours_platform: p.hours_platform,
            per_hour_tribunal: p.per_hour_tribunal,
            per_hour_platform: p.per_hour_platform,
        }),
    )?);

    out.push(write_rows(
        &dir.join("utilisation.csv"),
        r.utilisation.monthly.iter().map(|(&month, u)| UtilRow {
            month,
            driver_days: u.driver_days,
            standby: u.standby,
            en_route: u.en_route,
            on_trip: u.on_trip,
        }),
    )?);

    out.push(write_rows(
        &dir.join("take_rate_histogram.csv"),
        r.take_rate.iter().flat_map(|(era, t)| {
            t.histogram.bins.iter().map(move |b| BinRow {
                era: era.as_str(),
                label: &b.label,
                lo: b.lo,
                hi: b.hi,
                count: b.count,
            })
        }),
    )?);

    out.push(write_rows(
        &dir.join("per_minute_split.csv"),
        r.take_rate.iter().flat_map(|(era, t)| {
            t.per_minute.iter().map(move |b| PerMinuteRow {
                era: era.as_str(),
                label: &b.label,
                trips: b.trips,
                minutes: b.minutes,
                driver_per_min: b.driver_per_min,
                platform_per_min: b.platform_per_min,
                fare_per_min: b.fare_per_min,
            })
        }),
    )?);

    out.push(write_rows(
        &dir.join("surplus.csv"),
        r.surplus.series.iter().map(|p| SurplusRow {
            month: p.month,
            value: p.value,
            status: label(&p.status),
        }),
    )?);

    if let Some(split) = &r.cohort.split {
        out.push(write_rows(
            &dir.join("cohort.csv"),
            split.drivers.iter().map(|d| CohortRow {
                driver_id: d.driver_id.as_str(),
                pre_rate: d.pre_rate,
                post_rate: d.post_rate,
                pct_change: d.pct_change,
                group: label(&d.group),
            }),
        )?);
    }

    out.push(write_rows(
        &dir.join("acceptance.csv"),
        r.acceptance.per_driver.iter().map(|(id, &rate)| AcceptRow {
            driver_id: id,
            acceptance_rate: rate,
        }),
    )?);

    Ok(out)
}
