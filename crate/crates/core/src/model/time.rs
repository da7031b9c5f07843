use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn from_secs(s: i64) -> Self {
        Timestamp(s * 1000)
    }

    pub const fn millis(&self) -> i64 {
        self.0
    }

    pub fn to_utc(&self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .unwrap_or(DateTime::<Utc>::MIN_UTC)
    }

    pub fn plus_secs(&self, s: i64) -> Timestamp {
        Timestamp(self.0 + s * 1000)
    }

    /// RFC 3339 UTC, with a millisecond fraction only when non-zero.
    pub fn to_rfc3339(&self) -> String {
        self.to_utc().to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

/// How to read timestamps that carry no offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveTimestamps {
    #[default]
    Utc,
    Local,
}

impl FromStr for NaiveTimestamps {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "utc" => Ok(NaiveTimestamps::Utc),
            "local" => Ok(NaiveTimestamps::Local),
            other => Err(ModelError::InvalidConfig(format!("naive timestamp mode {other:?}"))),
        }
    }
}

/// Zone used for every local-time derivation (hour, weekday, calendar month,
/// ISO week) plus the rule for offset-less input timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Calendar {
    pub zone: Tz,
    pub naive: NaiveTimestamps,
}

impl Default for Calendar {
    fn default() -> Self {
        Calendar {
            zone: chrono_tz::Europe::London,
            naive: NaiveTimestamps::Utc,
        }
    }
}

impl Calendar {
    pub fn with_zone(zone: Tz) -> Self {
        Calendar {
            zone,
            ..Calendar::default()
        }
    }

    /// Calendar for an IANA zone name such as `Europe/London`.
    pub fn from_zone_name(name: &str, naive: NaiveTimestamps) -> Result<Self, ModelError> {
        let zone: Tz = name
            .trim()
            .parse()
            .map_err(|_| ModelError::InvalidConfig(format!("unknown time zone {name:?}")))?;
        Ok(Calendar { zone, naive })
    }

    pub fn local(&self, ts: Timestamp) -> DateTime<Tz> {
        ts.to_utc().with_timezone(&self.zone)
    }

    pub fn date(&self, ts: Timestamp) -> NaiveDate {
        self.local(ts).date_naive()
    }

    pub fn hour(&self, ts: Timestamp) -> u32 {
        self.local(ts).hour()
    }

    /// 0 = Monday … 6 = Sunday.
    pub fn weekday(&self, ts: Timestamp) -> u32 {
        self.local(ts).weekday().num_days_from_monday()
    }

    pub fn month(&self, ts: Timestamp) -> YearMonth {
        let d = self.local(ts);
        YearMonth::new(d.year(), d.month())
    }

    pub fn year(&self, ts: Timestamp) -> i32 {
        self.local(ts).year()
    }

    pub fn iso_week(&self, ts: Timestamp) -> IsoWeek {
        IsoWeek::of_date(self.date(ts))
    }

    /// First instant of a local calendar day.
    pub fn start_of_day(&self, date: NaiveDate) -> Timestamp {
        let naive = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
        self.resolve_local(naive)
    }

    pub fn month_range(&self, month: YearMonth) -> TimeRange {
        TimeRange::new(
            self.start_of_day(month.first_day()),
            self.start_of_day(month.next().first_day()),
        )
    }

    pub fn months_range(&self, first: YearMonth, last_inclusive: YearMonth) -> TimeRange {
        TimeRange::new(
            self.start_of_day(first.first_day()),
            self.start_of_day(last_inclusive.next().first_day()),
        )
    }

    pub fn week_range(&self, week: IsoWeek) -> TimeRange {
        let monday = week.monday();
        TimeRange::new(
            self.start_of_day(monday),
            self.start_of_day(monday + chrono::Duration::days(7)),
        )
    }

    pub fn day_range(&self, date: NaiveDate) -> TimeRange {
        TimeRange::new(
            self.start_of_day(date),
            self.start_of_day(date + chrono::Duration::days(1)),
        )
    }

    fn resolve_local(&self, naive: NaiveDateTime) -> Timestamp {
        match self.zone.from_local_datetime(&naive) {
            LocalResult::Single(dt) => Timestamp(dt.timestamp_millis()),
            LocalResult::Ambiguous(a, _) => Timestamp(a.timestamp_millis()),
            // spring-forward gap: the wall time does not exist, take the
            // instant one hour later
            LocalResult::None => {
                let shifted = naive + chrono::Duration::hours(1);
                self.resolve_local(shifted)
            }
        }
    }

    /// Parses RFC 3339 timestamps, or offset-less `YYYY-MM-DD[T ]HH:MM:SS[.fff]`
    /// read according to [`NaiveTimestamps`].
    pub fn parse_timestamp(&self, s: &str) -> Result<Timestamp, ModelError> {
        let raw = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
            return Ok(Timestamp(dt.timestamp_millis()));
        }
        if let Ok(dt) = DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f %z") {
            return Ok(Timestamp(dt.timestamp_millis()));
        }
        let naive = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f"))
            .map_err(|_| ModelError::InvalidTimestamp(s.to_string()))?;
        Ok(match self.naive {
            NaiveTimestamps::Utc => Timestamp(naive.and_utc().timestamp_millis()),
            NaiveTimestamps::Local => self.resolve_local(naive),
        })
    }
}

/// Half-open interval `[start, end)` of instants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        TimeRange { start, end }
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts < self.end
    }

    pub fn duration_ms(&self) -> i64 {
        (self.end.0 - self.start.0).max(0)
    }

    /// Length of the overlap with `[start, end)`, in milliseconds.
    pub fn overlap_ms(&self, start: Timestamp, end: Timestamp) -> i64 {
        let lo = self.start.max(start);
        let hi = self.end.min(end);
        (hi.0 - lo.0).max(0)
    }
}

/// A calendar month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        YearMonth { year, month }
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn next(&self) -> YearMonth {
        if self.month == 12 {
            YearMonth::new(self.year + 1, 1)
        } else {
            YearMonth::new(self.year, self.month + 1)
        }
    }

    pub fn prev(&self) -> YearMonth {
        if self.month == 1 {
            YearMonth::new(self.year - 1, 12)
        } else {
            YearMonth::new(self.year, self.month - 1)
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: YearMonth) -> i64 {
        (other.year as i64 - self.year as i64) * 12 + other.month as i64 - self.month as i64
    }

    pub fn plus_months(&self, n: i64) -> YearMonth {
        let idx = self.year as i64 * 12 + (self.month as i64 - 1) + n;
        YearMonth::new(idx.div_euclid(12) as i32, (idx.rem_euclid(12) + 1) as u32)
    }

    /// Inclusive iterator `self..=last`.
    pub fn through(self, last: YearMonth) -> impl Iterator<Item = YearMonth> {
        let n = self.months_until(last);
        (0..=n.max(-1)).map(move |i| self.plus_months(i))
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidMonth(s.to_string());
        let t = s.trim();
        let (y, m) = t.split_once(['-', '/']).ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.get(..2.min(m.len())).unwrap_or("").parse().map_err(|_| bad())?;
        // allow "2022-02-01" as a month spec
        if m.len() > 2 && !m[2..].starts_with('-') {
            return Err(bad());
        }
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(YearMonth::new(year, month))
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// ISO-8601 week (Monday start; week-year owns the week's Thursday).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn of_date(date: NaiveDate) -> Self {
        let w = date.iso_week();
        IsoWeek {
            year: w.year(),
            week: w.week(),
        }
    }

    pub fn monday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon).expect("valid iso week")
    }

    pub fn thursday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Thu).expect("valid iso week")
    }

    /// The calendar month the week is attributed to (the month of its Thursday).
    pub fn month(&self) -> YearMonth {
        let t = self.thursday();
        YearMonth::new(t.year(), t.month())
    }
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

impl FromStr for IsoWeek {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidWeek(s.to_string());
        let (y, w) = s.trim().split_once("-W").ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let week: u32 = w.parse().map_err(|_| bad())?;
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).ok_or_else(bad)?;
        Ok(IsoWeek { year, week })
    }
}

impl Serialize for IsoWeek {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IsoWeek {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pricing/export era.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Era {
    /// Fixed time-and-distance fares with a fixed commission; the exported
    /// fare is the rider's price.
    FixedCommission,
    /// The exported fare does not reflect the rider's price.
    OpaqueGap,
    /// Rider price and driver pay set independently per trip.
    DynamicPricing,
}

impl Era {
    pub const ALL: [Era; 3] = [Era::FixedCommission, Era::OpaqueGap, Era::DynamicPricing];

    pub fn as_str(&self) -> &'static str {
        match self {
            Era::FixedCommission => "fixed_commission",
            Era::OpaqueGap => "opaque_gap",
            Era::DynamicPricing => "dynamic_pricing",
        }
    }
}

impl fmt::Display for Era {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for EraBoundaries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.opaque_from, self.dynamic_from)
    }
}

/// The two months at which the era changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraBoundaries {
    pub opaque_from: YearMonth,
    pub dynamic_from: YearMonth,
}

impl Default for EraBoundaries {
    fn default() -> Self {
        EraBoundaries {
            opaque_from: YearMonth::new(2022, 2),
            dynamic_from: YearMonth::new(2023, 2),
        }
    }
}

impl EraBoundaries {
    pub fn new(opaque_from: YearMonth, dynamic_from: YearMonth) -> Result<Self, ModelError> {
        if opaque_from >= dynamic_from {
            return Err(ModelError::InvalidConfig(format!(
                "era boundaries must be increasing: {opaque_from} then {dynamic_from}"
            )));
        }
        Ok(EraBoundaries {
            opaque_from,
            dynamic_from,
        })
    }

    pub fn era_of_month(&self, month: YearMonth) -> Era {
        if month < self.opaque_from {
            Era::FixedCommission
        } else if month < self.dynamic_from {
            Era::OpaqueGap
        } else {
            Era::DynamicPricing
        }
    }

    pub fn era_of(&self, ts: Timestamp, calendar: &Calendar) -> Era {
        self.era_of_month(calendar.month(ts))
    }
}

impl FromStr for EraBoundaries {
    type Err = ModelError;
    /// `"2022-02,2023-02"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| ModelError::InvalidConfig(format!("era boundaries {s:?}")))?;
        EraBoundaries::new(a.parse()?, b.parse()?)
    }
}

/// Free-function form of [`EraBoundaries::era_of`].
pub fn era_of(ts: Timestamp, boundaries: &EraBoundaries, calendar: &Calendar) -> Era {
    boundaries.era_of(ts, calendar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: &str) -> Timestamp {
        Calendar::default().parse_timestamp(s).unwrap()
    }

    #[test]
    fn era_examples() {
        let b = EraBoundaries::default();
        let cal = Calendar::default();
        assert_eq!(era_of(ts("2021-06-15T12:00:00Z"), &b, &cal), Era::FixedCommission);
        assert_eq!(era_of(ts("2022-02-01T12:00:00Z"), &b, &cal), Era::OpaqueGap);
        assert_eq!(era_of(ts("2023-02-01T12:00:00Z"), &b, &cal), Era::DynamicPricing);
        assert_eq!(era_of(ts("2023-01-31T12:00:00Z"), &b, &cal), Era::OpaqueGap);
    }

    #[test]
    fn era_month_uses_local_zone() {
        // 23:30 UTC on 31 Jan is still January in London (GMT, no offset) but
        // February in Berlin.
        let b = EraBoundaries::default();
        let t = ts("2022-01-31T23:30:00Z");
        assert_eq!(b.era_of(t, &Calendar::default()), Era::FixedCommission);
        assert_eq!(
            b.era_of(t, &Calendar::with_zone(chrono_tz::Europe::Berlin)),
            Era::OpaqueGap
        );
    }

    #[test]
    fn boundaries_must_be_ordered() {
        assert!(EraBoundaries::new(YearMonth::new(2023, 2), YearMonth::new(2022, 2)).is_err());
        assert!("2022-02,2022-02".parse::<EraBoundaries>().is_err());
        assert_eq!(
            "2022-02,2023-02".parse::<EraBoundaries>().unwrap(),
            EraBoundaries::default()
        );
    }

    #[test]
    fn parses_naive_and_offset_timestamps() {
        let utc = Calendar::default();
        let local = Calendar {
            naive: NaiveTimestamps::Local,
            ..Calendar::default()
        };
        // BST in July: local 10:00 is 09:00 UTC
        assert_eq!(
            local.parse_timestamp("2023-07-01 10:00:00").unwrap(),
            utc.parse_timestamp("2023-07-01T09:00:00Z").unwrap()
        );
        assert_eq!(
            utc.parse_timestamp("2023-07-01 10:00:00").unwrap(),
            utc.parse_timestamp("2023-07-01T11:00:00+01:00").unwrap()
        );
        assert!(utc.parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn month_and_week_parsing() {
        assert_eq!("2022-02".parse::<YearMonth>().unwrap(), YearMonth::new(2022, 2));
        assert_eq!("2022-02-01".parse::<YearMonth>().unwrap(), YearMonth::new(2022, 2));
        assert!("2022-13".parse::<YearMonth>().is_err());
        assert_eq!("2021-W52".parse::<IsoWeek>().unwrap().to_string(), "2021-W52");
        assert!("2021-W54".parse::<IsoWeek>().is_err());
        // 2021-01-01 is a Friday in ISO week 2020-W53
        let w = IsoWeek::of_date(NaiveDate::from_ymd_opt(2021, 1, 1).unwrap());
        assert_eq!(w.to_string(), "2020-W53");
        assert_eq!(w.month(), YearMonth::new(2020, 12));
    }

    #[test]
    fn month_arithmetic() {
        let m = YearMonth::new(2022, 11);
        assert_eq!(m.plus_months(3), YearMonth::new(2023, 2));
        assert_eq!(m.plus_months(-11), YearMonth::new(2021, 12));
        assert_eq!(m.months_until(YearMonth::new(2023, 2)), 3);
        assert_eq!(m.through(YearMonth::new(2023, 1)).count(), 3);
        assert_eq!(m.through(YearMonth::new(2022, 1)).count(), 0);
    }

    #[test]
    fn dst_day_lengths() {
        let cal = Calendar::default();
        let spring = cal.day_range(NaiveDate::from_ymd_opt(2023, 3, 26).unwrap());
        assert_eq!(spring.duration_ms(), 23 * 3_600_000);
        let autumn = cal.day_range(NaiveDate::from_ymd_opt(2023, 10, 29).unwrap());
        assert_eq!(autumn.duration_ms(), 25 * 3_600_000);
    }

    proptest! {
        #[test]
        fn era_partitions_time(ms in 946_684_800_000i64..1_893_456_000_000) {
            let b = EraBoundaries::default();
            let cal = Calendar::default();
            let t = Timestamp(ms);
            let era = b.era_of(t, &cal);
            let hits = Era::ALL.iter().filter(|&&e| e == era).count();
            prop_assert_eq!(hits, 1);
            let m = cal.month(t);
            let expected = if m < b.opaque_from { Era::FixedCommission }
                else if m < b.dynamic_from { Era::OpaqueGap } else { Era::DynamicPricing };
            prop_assert_eq!(era, expected);
        }

        #[test]
        fn local_derivations_are_stable(ms in 946_684_800_000i64..1_893_456_000_000) {
            let cal = Calendar::default();
            let t = Timestamp(ms);
            prop_assert_eq!(cal.hour(t), cal.hour(t));
            prop_assert_eq!(cal.weekday(t), cal.weekday(t));
            prop_assert!(cal.day_range(cal.date(t)).contains(t));
            prop_assert!(cal.week_range(cal.iso_week(t)).contains(t));
            prop_assert!(cal.month_range(cal.month(t)).contains(t));
            prop_assert_eq!(Calendar::default().parse_timestamp(&t.to_rfc3339()).unwrap(), t);
        }
    }
}
