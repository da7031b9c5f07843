use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::linkage::LinkedTrip;
use crate::model::{ActivitySegment, Calendar, DriverId, SegmentState, YearMonth};
use crate::numeric::Scalar;

/// Fare margin and on-trip time behind one month's surplus figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurplusMonth {
    pub month: YearMonth,
    pub trips: usize,
    /// `Σ (rider fare − driver total)` in minor units.
    pub margin_minor: i64,
    pub on_trip_hours: f64,
    /// Major units per on-trip hour.
    pub per_hour: f64,
}

/// On-trip segments of the drivers active in a month.
#[derive(Clone, Debug, Default)]
pub struct DriverActivity {
    on_trip: BTreeMap<DriverId, Vec<(i64, i64)>>,
}

impl DriverActivity {
    pub fn new(segments: &[ActivitySegment]) -> Self {
        let mut on_trip: BTreeMap<DriverId, Vec<(i64, i64)>> = BTreeMap::new();
        for s in segments.iter().filter(|s| s.state == SegmentState::OnTrip) {
            on_trip
                .entry(s.driver_id.clone())
                .or_default()
                .push((s.start_ts.0, s.end_ts.0));
        }
        DriverActivity { on_trip }
    }

    /// On-trip milliseconds of `driver` inside `[start, end)`.
    pub fn on_trip_ms(&self, driver: &DriverId, start: i64, end: i64) -> i64 {
        self.on_trip
            .get(driver)
            .map(|v| v.iter().map(|&(s, e)| (e.min(end) - s.max(start)).max(0)).sum())
            .unwrap_or(0)
    }
}

/// Surplus per on-trip hour for one month: the fare margin of share-valid
/// trips requested in the month, over the on-trip hours that month of the
/// drivers who made them.
pub fn surplus_for_month(
    linked: &[LinkedTrip],
    activity: &DriverActivity,
    month: YearMonth,
    calendar: &Calendar,
) -> Result<SurplusMonth, MetricsError> {
    let mut margin = 0i64;
    let mut trips = 0usize;
    let mut drivers: BTreeSet<&DriverId> = BTreeSet::new();
    for l in linked {
        let Some(fare) = l.rider_fare else { continue };
        if calendar.month(l.trip.request_ts) != month {
            continue;
        }
        margin += fare.minor_units - l.driver_total.minor_units;
        trips += 1;
        drivers.insert(&l.trip.driver_id);
    }
    if trips == 0 {
        return Err(MetricsError::NoValidTrips);
    }
    let range = calendar.month_range(month);
    let ms: i64 = drivers
        .iter()
        .map(|d| activity.on_trip_ms(d, range.start.0, range.end.0))
        .sum();
    if ms <= 0 {
        return Err(MetricsError::ZeroHours);
    }
    let hours = ms as f64 / 3_600_000.0;
    Ok(SurplusMonth {
        month,
        trips,
        margin_minor: margin,
        on_trip_hours: hours,
        per_hour: margin as f64 / 100.0 / hours,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Direct,
    Interpolated,
    /// A gap not bracketed by direct values on both sides.
    Missing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint<T = f64> {
    pub month: YearMonth,
    pub value: Option<T>,
    pub status: PointStatus,
}

/// Fills each run of `None` months lying strictly between two direct values
/// by linear interpolation in month distance. Runs touching either end of
/// the series stay missing.
pub fn interpolate_gaps<T: Scalar>(series: &BTreeMap<YearMonth, Option<T>>) -> Vec<SeriesPoint<T>> {
    let known: Vec<(YearMonth, T)> = series.iter().filter_map(|(&m, v)| v.map(|v| (m, v))).collect();
    series
        .iter()
        .map(|(&month, v)| {
            if let Some(v) = v {
                return SeriesPoint {
                    month,
                    value: Some(*v),
                    status: PointStatus::Direct,
                };
            }
            let after = known.partition_point(|&(m, _)| m < month);
            if after == 0 || after == known.len() {
                return SeriesPoint {
                    month,
                    value: None,
                    status: PointStatus::Missing,
                };
            }
            let (m0, v0) = known[after - 1];
            let (m1, v1) = known[after];
            let t = T::of(m0.months_until(month) as f64) / T::of(m0.months_until(m1) as f64);
            SeriesPoint {
                month,
                value: Some(v0 + (v1 - v0) * t),
                status: PointStatus::Interpolated,
            }
        })
        .collect()
}

/// Monthly surplus per on-trip hour over `first ..= last`. Months without a
/// direct value (the opaque-fare era, or no share-valid trips) are
/// interpolated when bracketed and otherwise left missing.
pub fn surplus_series(
    linked: &[LinkedTrip],
    segments: &[ActivitySegment],
    first: YearMonth,
    last: YearMonth,
    calendar: &Calendar,
) -> (Vec<SurplusMonth>, Vec<SeriesPoint>) {
    let activity = DriverActivity::new(segments);
    let mut by_month: BTreeMap<YearMonth, Vec<LinkedTrip>> = BTreeMap::new();
    for l in linked.iter().filter(|l| l.rider_fare.is_some()) {
        by_month
            .entry(calendar.month(l.trip.request_ts))
            .or_default()
            .push(l.clone());
    }
    let mut direct = Vec::new();
    let mut series = BTreeMap::new();
    for m in first.through(last) {
        let value = by_month
            .get(&m)
            .and_then(|ls| surplus_for_month(ls, &activity, m, calendar).ok());
        series.insert(m, value.as_ref().map(|s| s.per_hour));
        direct.extend(value);
    }
    (direct, interpolate_gaps(&series))
}
