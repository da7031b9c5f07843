//! Reconstructing standby / en-route / on-trip time.
//!
//! Trip intervals come straight from the trip timestamps (accept→pickup is
//! en route, pickup→dropoff on trip, accept→cancellation en route for a
//! cancelled trip). Standby is whatever remains of the app sessions. When
//! trip intervals overlap each other, on-trip time wins over en-route time.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    ActivitySegment, AppSession, Calendar, DriverId, SegmentState, TimeRange, Timestamp, TripRecord, YearMonth,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingTimeDefinition {
    /// Logged in and available: standby + en route + on trip.
    Tribunal,
    /// En route + on trip only.
    Platform,
}

impl WorkingTimeDefinition {
    pub fn counts(&self, state: SegmentState) -> bool {
        match self {
            WorkingTimeDefinition::Tribunal => true,
            WorkingTimeDefinition::Platform => state != SegmentState::Standby,
        }
    }
}

/// A trip none of whose time falls inside an app session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrphanTrip {
    pub request_ts: Timestamp,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentBuild {
    pub segments: Vec<ActivitySegment>,
    pub orphans: Vec<OrphanTrip>,
}

fn merge_intervals(mut v: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    v.retain(|(a, b)| a < b);
    v.sort();
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Intersection of `[a, b)` with a sorted, disjoint interval list.
fn clip(a: i64, b: i64, envelope: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let start = envelope.partition_point(|&(_, e)| e <= a);
    envelope[start..]
        .iter()
        .take_while(|&&(s, _)| s < b)
        .map(|&(s, e)| (a.max(s), b.min(e)))
        .filter(|(x, y)| x < y)
        .collect()
}

/// Raw en-route and on-trip intervals of one trip.
fn trip_intervals(t: &TripRecord) -> Vec<(i64, i64, SegmentState)> {
    let mut v = Vec::new();
    if t.is_completed() {
        if let (Some(a), Some(p), Some(d)) = (t.accept_ts, t.pickup_ts, t.dropoff_ts) {
            v.push((a.0, p.0, SegmentState::EnRoute));
            v.push((p.0, d.0, SegmentState::OnTrip));
        }
    } else if let (Some(a), Some(c)) = (t.accept_ts, t.cancel_ts) {
        match t.pickup_ts {
            Some(p) if p <= c => {
                v.push((a.0, p.0, SegmentState::EnRoute));
                v.push((p.0, c.0, SegmentState::OnTrip));
            }
            _ => v.push((a.0, c.0, SegmentState::EnRoute)),
        }
    }
    v.retain(|(s, e, _)| s < e);
    v
}

/// Builds the driver's activity timeline from sessions and trips.
///
/// Output segments are time-sorted and pairwise disjoint, with adjacent
/// segments of the same state merged. Trip time overlapping a session is
/// clipped to the session; a trip lying wholly outside every session keeps
/// its full intervals and is reported as an orphan.
pub fn build_segments(driver: &DriverId, sessions: &[AppSession], trips: &[TripRecord]) -> SegmentBuild {
    let envelope = merge_intervals(sessions.iter().map(|s| (s.login_ts.0, s.logout_ts.0)).collect());
    let mut orphans = Vec::new();
    let mut work: Vec<(i64, i64, SegmentState)> = Vec::new();
    for t in trips {
        let iv = trip_intervals(t);
        if iv.is_empty() {
            continue;
        }
        let inside: Vec<(i64, i64, SegmentState)> = iv
            .iter()
            .flat_map(|&(a, b, st)| clip(a, b, &envelope).into_iter().map(move |(x, y)| (x, y, st)))
            .collect();
        if inside.is_empty() {
            orphans.push(OrphanTrip {
                request_ts: t.request_ts,
                reason: "trip lies outside every app session".to_string(),
            });
            work.extend(iv);
        } else {
            work.extend(inside);
        }
    }

    // sweep over boundaries, tracking how many intervals of each kind cover
    // the current elementary span
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum Kind {
        Session,
        EnRoute,
        OnTrip,
    }
    let mut events: Vec<(i64, i32, Kind)> = Vec::with_capacity(2 * (envelope.len() + work.len()));
    for &(a, b) in &envelope {
        events.push((a, 1, Kind::Session));
        events.push((b, -1, Kind::Session));
    }
    for &(a, b, st) in &work {
        let k = if st == SegmentState::OnTrip {
            Kind::OnTrip
        } else {
            Kind::EnRoute
        };
        events.push((a, 1, k));
        events.push((b, -1, k));
    }
    events.sort();

    let mut counts = [0i32; 3];
    let mut segments: Vec<ActivitySegment> = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            let (_, delta, kind) = events[i];
            counts[kind as usize] += delta;
            i += 1;
        }
        let Some(&(next, _, _)) = events.get(i) else { break };
        let state = if counts[Kind::OnTrip as usize] > 0 {
            Some(SegmentState::OnTrip)
        } else if counts[Kind::EnRoute as usize] > 0 {
            Some(SegmentState::EnRoute)
        } else if counts[Kind::Session as usize] > 0 {
            Some(SegmentState::Standby)
        } else {
            None
        };
        if let Some(state) = state {
            match segments.last_mut() {
                Some(last) if last.state == state && last.end_ts.0 == t => last.end_ts = Timestamp(next),
                _ => segments.push(ActivitySegment {
                    driver_id: driver.clone(),
                    start_ts: Timestamp(t),
                    end_ts: Timestamp(next),
                    state,
                }),
            }
        }
    }

    SegmentBuild { segments, orphans }
}

/// Milliseconds per state inside `period`, indexed by [`SegmentState::index`].
pub fn state_totals_ms(segments: &[ActivitySegment], period: &TimeRange) -> [i64; 3] {
    let mut totals = [0i64; 3];
    for s in segments {
        totals[s.state.index()] += period.overlap_ms(s.start_ts, s.end_ts);
    }
    totals
}

/// Hours worked inside `period` under the given definition; segments
/// straddling the period edges count only their inside part.
pub fn hours_worked(segments: &[ActivitySegment], period: &TimeRange, definition: WorkingTimeDefinition) -> f64 {
    let totals = state_totals_ms(segments, period);
    let ms: i64 = SegmentState::ALL
        .iter()
        .filter(|s| definition.counts(**s))
        .map(|s| totals[s.index()])
        .sum();
    ms as f64 / 3_600_000.0
}

/// Average hours per active day in each state for one month.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyUtilisation {
    pub standby: f64,
    pub en_route: f64,
    pub on_trip: f64,
    pub active_days: usize,
}

impl DailyUtilisation {
    pub fn total(&self) -> f64 {
        self.standby + self.en_route + self.on_trip
    }
}

/// Local dates with any activity inside `period`.
pub fn active_days(segments: &[ActivitySegment], period: &TimeRange, calendar: &Calendar) -> BTreeSet<NaiveDate> {
    let mut days = BTreeSet::new();
    for s in segments {
        let start = s.start_ts.max(period.start);
        let end = s.end_ts.min(period.end);
        if start >= end {
            continue;
        }
        let mut day = calendar.date(start);
        loop {
            let r = calendar.day_range(day);
            if r.start >= end {
                break;
            }
            if r.overlap_ms(start, end) > 0 {
                days.insert(day);
            }
            day = day.succ_opt().expect("date in range");
        }
    }
    days
}

/// Per-state monthly totals divided by the number of distinct local days
/// with any activity that month.
pub fn utilisation_daily(segments: &[ActivitySegment], month: YearMonth, calendar: &Calendar) -> DailyUtilisation {
    let range = calendar.month_range(month);
    let totals = state_totals_ms(segments, &range);
    let days = active_days(segments, &range, calendar).len();
    if days == 0 {
        return DailyUtilisation::default();
    }
    let per_day = |ms: i64| ms as f64 / 3_600_000.0 / days as f64;
    DailyUtilisation {
        standby: per_day(totals[0]),
        en_route: per_day(totals[1]),
        on_trip: per_day(totals[2]),
        active_days: days,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Money, TripStatus};
    use proptest::prelude::*;

    const H: i64 = 3_600_000;
    const M: i64 = 60_000;
    // 2021-03-01T00:00:00Z, a Monday, GMT
    const DAY0: i64 = 1_614_556_800_000;

    fn at(h: i64, m: i64) -> Timestamp {
        Timestamp(DAY0 + h * H + m * M)
    }

    fn d() -> DriverId {
        DriverId::new("d")
    }

    fn session(a: Timestamp, b: Timestamp) -> AppSession {
        AppSession {
            driver_id: d(),
            login_ts: a,
            logout_ts: b,
        }
    }

    fn trip(accept: Timestamp, pickup: Timestamp, dropoff: Timestamp) -> TripRecord {
        TripRecord {
            driver_id: d(),
            request_ts: accept,
            accept_ts: Some(accept),
            pickup_ts: Some(pickup),
            dropoff_ts: Some(dropoff),
            cancel_ts: None,
            distance_miles: 1.0,
            status: TripStatus::Completed,
            original_fare: Some(Money::gbp(100)),
            origin_tag: String::new(),
            dest_tag: String::new(),
            product: String::new(),
            pickup_address: None,
            dropoff_address: None,
            vehicle_plate: None,
        }
    }

    fn shape(b: &SegmentBuild) -> Vec<(Timestamp, Timestamp, SegmentState)> {
        b.segments.iter().map(|s| (s.start_ts, s.end_ts, s.state)).collect()
    }

    #[test]
    fn two_hour_session_one_trip() {
        let b = build_segments(
            &d(),
            &[session(at(10, 0), at(12, 0))],
            &[trip(at(10, 30), at(10, 40), at(11, 10))],
        );
        assert_eq!(
            shape(&b),
            vec![
                (at(10, 0), at(10, 30), SegmentState::Standby),
                (at(10, 30), at(10, 40), SegmentState::EnRoute),
                (at(10, 40), at(11, 10), SegmentState::OnTrip),
                (at(11, 10), at(12, 0), SegmentState::Standby),
            ]
        );
        let day = TimeRange::new(at(0, 0), at(24, 0));
        assert!((hours_worked(&b.segments, &day, WorkingTimeDefinition::Tribunal) - 2.0).abs() < 1e-12);
        assert!((hours_worked(&b.segments, &day, WorkingTimeDefinition::Platform) - 40.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn idle_session_is_all_standby() {
        let b = build_segments(&d(), &[session(at(8, 0), at(9, 0))], &[]);
        assert_eq!(shape(&b), vec![(at(8, 0), at(9, 0), SegmentState::Standby)]);
        assert!(b.orphans.is_empty());
    }

    #[test]
    fn empty_segments_zero_hours() {
        let r = TimeRange::new(at(0, 0), at(24, 0));
        assert_eq!(hours_worked(&[], &r, WorkingTimeDefinition::Tribunal), 0.0);
        assert_eq!(hours_worked(&[], &r, WorkingTimeDefinition::Platform), 0.0);
    }

    #[test]
    fn trip_overhanging_session_is_clipped() {
        let b = build_segments(
            &d(),
            &[session(at(10, 0), at(11, 0))],
            &[trip(at(10, 40), at(10, 50), at(11, 20))],
        );
        assert_eq!(b.segments.last().unwrap().end_ts, at(11, 0));
        assert!(b.orphans.is_empty());
    }

    #[test]
    fn orphan_trip_kept_and_flagged() {
        let b = build_segments(
            &d(),
            &[session(at(10, 0), at(11, 0))],
            &[trip(at(13, 0), at(13, 5), at(13, 30))],
        );
        assert_eq!(b.orphans.len(), 1);
        let day = TimeRange::new(at(0, 0), at(24, 0));
        assert!((hours_worked(&b.segments, &day, WorkingTimeDefinition::Platform) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cancelled_trip_en_route_until_cancellation() {
        let mut t = trip(at(10, 10), at(10, 20), at(10, 30));
        t.status = TripStatus::RiderCancelled;
        t.pickup_ts = None;
        t.dropoff_ts = None;
        t.cancel_ts = Some(at(10, 15));
        let b = build_segments(&d(), &[session(at(10, 0), at(11, 0))], &[t.clone()]);
        assert_eq!(
            b.segments[1],
            ActivitySegment {
                driver_id: d(),
                start_ts: at(10, 10),
                end_ts: at(10, 15),
                state: SegmentState::EnRoute
            }
        );
        t.cancel_ts = None;
        let b = build_segments(&d(), &[session(at(10, 0), at(11, 0))], &[t]);
        assert_eq!(b.segments.len(), 1);
    }

    #[test]
    fn period_edges_clip() {
        let b = build_segments(&d(), &[session(at(23, 0), at(25, 0))], &[]);
        let day = TimeRange::new(at(0, 0), at(24, 0));
        assert!((hours_worked(&b.segments, &day, WorkingTimeDefinition::Tribunal) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn utilisation_averages_over_active_days() {
        // ten days with 1.5h standby each
        let sessions: Vec<_> = (0..10)
            .map(|k| session(at(24 * k + 9, 0), at(24 * k + 10, 30)))
            .collect();
        let b = build_segments(&d(), &sessions, &[]);
        let u = utilisation_daily(&b.segments, YearMonth::new(2021, 3), &Calendar::default());
        assert_eq!(u.active_days, 10);
        assert!((u.standby - 1.5).abs() < 1e-12);
        let none = utilisation_daily(&b.segments, YearMonth::new(2021, 4), &Calendar::default());
        assert_eq!(none, DailyUtilisation::default());
    }

    /// Sessions as (start, length) and trips as (start, en-route, on-trip) minutes.
    type Day = (Vec<(i64, i64)>, Vec<(i64, i64, i64)>);

    fn arb_day() -> impl Strategy<Value = Day> {
        let sessions = proptest::collection::vec((0i64..1000, 1i64..300), 0..5);
        let trips = proptest::collection::vec((0i64..1200, 0i64..30, 1i64..60), 0..8);
        (sessions, trips)
    }

    proptest! {
        #[test]
        fn segments_disjoint_sorted_and_conserving((ss, ts) in arb_day()) {
            let sessions: Vec<_> = ss.iter().map(|&(a, l)| session(Timestamp(DAY0 + a * M), Timestamp(DAY0 + (a + l) * M))).collect();
            let trips: Vec<_> = ts.iter().map(|&(a, e, o)| trip(Timestamp(DAY0 + a * M), Timestamp(DAY0 + (a + e) * M), Timestamp(DAY0 + (a + e + o) * M))).collect();
            let b = build_segments(&d(), &sessions, &trips);
            for w in b.segments.windows(2) {
                prop_assert!(w[0].end_ts <= w[1].start_ts);
            }
            prop_assert!(b.segments.iter().all(|s| s.start_ts < s.end_ts));
            let all = TimeRange::new(Timestamp(DAY0 - H), Timestamp(DAY0 + 48 * H));
            let trib = hours_worked(&b.segments, &all, WorkingTimeDefinition::Tribunal);
            let plat = hours_worked(&b.segments, &all, WorkingTimeDefinition::Platform);
            prop_assert!(plat <= trib);
            if b.orphans.is_empty() {
                // coverage equals the session union exactly
                let env = merge_intervals(sessions.iter().map(|s| (s.login_ts.0, s.logout_ts.0)).collect());
                let env_ms: i64 = env.iter().map(|(a, b)| b - a).sum();
                let seg_ms: i64 = b.segments.iter().map(|s| s.duration_ms()).sum();
                prop_assert_eq!(env_ms, seg_ms);
            }
            let month = YearMonth::new(2021, 3);
            let u = utilisation_daily(&b.segments, month, &Calendar::default());
            let month_trib = hours_worked(&b.segments, &Calendar::default().month_range(month), WorkingTimeDefinition::Tribunal);
            prop_assert!((u.total() * u.active_days as f64 - month_trib).abs() < 1e-9);
        }
    }
}
