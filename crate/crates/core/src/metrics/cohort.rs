use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use super::WeeklyPayRow;
use crate::model::{Calendar, DriverId, ModelError, TripRecord, YearMonth};
use crate::worktime::WorkingTimeDefinition;

/// Inclusive range of calendar months, written `2022-03..2023-01`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub first: YearMonth,
    pub last: YearMonth,
}

impl MonthRange {
    pub fn new(first: YearMonth, last: YearMonth) -> Result<Self, MetricsError> {
        if last < first {
            return Err(MetricsError::InvalidWindows(format!(
                "{first}..{last} ends before it starts"
            )));
        }
        Ok(MonthRange { first, last })
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.first <= m && m <= self.last
    }

    pub fn len(&self) -> i64 {
        self.first.months_until(self.last) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        self.first.through(self.last)
    }

    pub fn overlaps(&self, other: &MonthRange) -> bool {
        self.first <= other.last && other.first <= self.last
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for MonthRange {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |e: ModelError| MetricsError::InvalidWindows(format!("{s}: {e}"));
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| MetricsError::InvalidWindows(format!("{s}: expected FIRST..LAST")))?;
        MonthRange::new(a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortGroup {
    PaidLess,
    PaidSameOrMore,
}

impl CohortGroup {
    pub fn of_change(pct_change: f64) -> Self {
        if pct_change < 0.0 {
            CohortGroup::PaidLess
        } else {
            CohortGroup::PaidSameOrMore
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortDriver {
    pub driver_id: DriverId,
    pub pre_rate: f64,
    pub post_rate: f64,
    /// Percent change from pre to post.
    pub pct_change: f64,
    pub group: CohortGroup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub window_pre: MonthRange,
    pub window_post: MonthRange,
    pub drivers: Vec<CohortDriver>,
    pub paid_less: Vec<DriverId>,
    pub paid_same_or_more: Vec<DriverId>,
    /// Drivers missing a completed trip in at least one month.
    pub excluded_missing_month: Vec<DriverId>,
    /// Drivers active every month but with no logged hours in a window.
    pub excluded_no_hours: Vec<DriverId>,
    /// Pooled tribunal pay per hour across all qualified drivers.
    pub pre_rate_pooled: Option<f64>,
    pub post_rate_pooled: Option<f64>,
}

impl CohortSplit {
    pub fn qualified(&self) -> impl Iterator<Item = &DriverId> {
        self.drivers.iter().map(|d| &d.driver_id)
    }
}

fn pooled_rate<'a>(rows: impl Iterator<Item = &'a WeeklyPayRow>) -> Option<f64> {
    let mut pence = 0i64;
    let mut hours: Vec<f64> = Vec::new();
    for r in rows {
        pence += r.net_pay.minor_units;
        hours.push(r.hours(WorkingTimeDefinition::Tribunal));
    }
    hours.sort_by(|a, b| a.partial_cmp(b).expect("finite hours"));
    let total: f64 = hours.iter().sum();
    (total > 0.0).then(|| pence as f64 / 100.0 / total)
}

/// Splits drivers by the change in their tribunal-definition pay per hour
/// between two windows. Only drivers with a completed trip in every month of
/// both windows qualify. Weekly rows count toward the month of their
/// Thursday.
pub fn cohort_pay_change(
    rows: &[WeeklyPayRow],
    trips: &[TripRecord],
    window_pre: MonthRange,
    window_post: MonthRange,
    calendar: &Calendar,
) -> Result<CohortSplit, MetricsError> {
    if window_pre.overlaps(&window_post) {
        return Err(MetricsError::InvalidWindows(format!(
            "{window_pre} overlaps {window_post}"
        )));
    }
    if window_pre.len() != window_post.len() {
        return Err(MetricsError::InvalidWindows(format!(
            "{window_pre} and {window_post} differ in length"
        )));
    }

    let needed: BTreeSet<YearMonth> = window_pre.months().chain(window_post.months()).collect();
    let mut active: BTreeMap<&DriverId, BTreeSet<YearMonth>> = BTreeMap::new();
    for t in trips.iter().filter(|t| t.is_completed()) {
        let m = calendar.month(t.request_ts);
        let months = active.entry(&t.driver_id).or_default();
        if needed.contains(&m) {
            months.insert(m);
        }
    }
    let mut by_driver: BTreeMap<&DriverId, Vec<&WeeklyPayRow>> = BTreeMap::new();
    for r in rows {
        by_driver.entry(&r.driver_id).or_default().push(r);
    }
    let everyone: BTreeSet<&DriverId> = active.keys().chain(by_driver.keys()).copied().collect();

    let mut split = CohortSplit {
        window_pre,
        window_post,
        drivers: Vec::new(),
        paid_less: Vec::new(),
        paid_same_or_more: Vec::new(),
        excluded_missing_month: Vec::new(),
        excluded_no_hours: Vec::new(),
        pre_rate_pooled: None,
        post_rate_pooled: None,
    };
    let mut pre_rows: Vec<&WeeklyPayRow> = Vec::new();
    let mut post_rows: Vec<&WeeklyPayRow> = Vec::new();
    for d in everyone {
        if active.get(d).map(|m| m.len()) != Some(needed.len()) {
            split.excluded_missing_month.push(d.clone());
            continue;
        }
        let rs = by_driver.get(d).map(Vec::as_slice).unwrap_or(&[]);
        let pre: Vec<&WeeklyPayRow> = rs
            .iter()
            .copied()
            .filter(|r| window_pre.contains(r.iso_week.month()))
            .collect();
        let post: Vec<&WeeklyPayRow> = rs
            .iter()
            .copied()
            .filter(|r| window_post.contains(r.iso_week.month()))
            .collect();
        let (Some(pre_rate), Some(post_rate)) = (pooled_rate(pre.iter().copied()), pooled_rate(post.iter().copied()))
        else {
            split.excluded_no_hours.push(d.clone());
            continue;
        };
        let pct_change = (post_rate - pre_rate) / pre_rate * 100.0;
        let group = CohortGroup::of_change(pct_change);
        match group {
            CohortGroup::PaidLess => split.paid_less.push(d.clone()),
            CohortGroup::PaidSameOrMore => split.paid_same_or_more.push(d.clone()),
        }
        split.drivers.push(CohortDriver {
            driver_id: d.clone(),
            pre_rate,
            post_rate,
            pct_change,
            group,
        });
        pre_rows.extend(pre);
        post_rows.extend(post);
    }
    split.pre_rate_pooled = pooled_rate(pre_rows.into_iter());
    split.post_rate_pooled = pooled_rate(post_rows.into_iter());
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IsoWeek, Money, TripStatus};

    fn cal() -> Calendar {
        Calendar::default()
    }

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn trip(driver: &str, month: &str) -> TripRecord {
        let t0 = cal().parse_timestamp(&format!("{month}-15T12:00:00Z")).unwrap();
        TripRecord {
            driver_id: DriverId::new(driver),
            request_ts: t0,
            accept_ts: Some(t0),
            pickup_ts: Some(t0),
            dropoff_ts: Some(t0.plus_secs(600)),
            cancel_ts: None,
            distance_miles: 1.0,
            status: TripStatus::Completed,
            original_fare: None,
            origin_tag: String::new(),
            dest_tag: String::new(),
            product: String::new(),
            pickup_address: None,
            dropoff_address: None,
            vehicle_plate: None,
        }
    }

    fn row(driver: &str, week: &str, pence: i64, hours: f64) -> WeeklyPayRow {
        WeeklyPayRow {
            driver_id: DriverId::new(driver),
            iso_week: week.parse::<IsoWeek>().unwrap(),
            net_pay: Money::gbp(pence),
            hours_tribunal: hours,
            hours_platform: hours / 2.0,
        }
    }

    #[test]
    fn pay_cut_and_exclusion() {
        let pre = MonthRange::new(ym("2022-01"), ym("2022-01")).unwrap();
        let post = MonthRange::new(ym("2023-03"), ym("2023-03")).unwrap();
        let trips = [
            trip("a", "2022-01"),
            trip("a", "2023-03"),
            trip("b", "2022-01"),
            trip("c", "2022-01"),
            trip("c", "2023-03"),
        ];
        let rows = [
            row("a", "2022-W02", 20_000, 10.0),
            row("a", "2023-W11", 18_000, 10.0),
            row("b", "2022-W02", 20_000, 10.0),
            row("c", "2022-W02", 10_000, 10.0),
            row("c", "2023-W11", 10_000, 10.0),
        ];
        let s = cohort_pay_change(&rows, &trips, pre, post, &cal()).unwrap();
        assert_eq!(s.paid_less, [DriverId::new("a")]);
        assert_eq!(s.paid_same_or_more, [DriverId::new("c")]);
        assert_eq!(s.excluded_missing_month, [DriverId::new("b")]);
        assert!((s.drivers[0].pct_change + 10.0).abs() < 1e-9);
        assert_eq!(s.drivers[1].pct_change, 0.0);
        assert_eq!(s.paid_less.len() + s.paid_same_or_more.len(), s.drivers.len());
    }

    #[test]
    fn windows_validated() {
        let a: MonthRange = "2022-01..2022-03".parse().unwrap();
        let b: MonthRange = "2022-03..2022-05".parse().unwrap();
        let c: MonthRange = "2023-01..2023-02".parse().unwrap();
        assert!(matches!(
            cohort_pay_change(&[], &[], a, b, &cal()),
            Err(MetricsError::InvalidWindows(_))
        ));
        assert!(matches!(
            cohort_pay_change(&[], &[], a, c, &cal()),
            Err(MetricsError::InvalidWindows(_))
        ));
        assert!("2022-05..2022-01".parse::<MonthRange>().is_err());
        assert_eq!(a.to_string(), "2022-01..2022-03");
    }
}
