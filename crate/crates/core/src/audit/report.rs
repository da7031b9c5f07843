use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AuditConfig, BundleFailure, BundleOutcome};
use crate::ingest::{detect_fare_semantics, FareSemantics, TableKind, TableReport};
use crate::linkage::{LinkedTrip, UnmatchedPayment, UnmatchedTrip};
use crate::metrics::{
    acceptance_rate, adjust_inflation, cohort_pay_change, cohort_summary, distribution_compare, pay_per_hour,
    per_minute_fare_by_split, surplus_series, take_rate_histogram, take_rate_stats, CohortGroup, CohortSplit,
    DemographicSummary, GroupBy, MonthRange, PerMinuteBin, SeriesPoint, ShareHistogram, SurplusMonth, TakeRateStats,
    WeeklyPayRow,
};
use crate::model::{Calendar, DriverId, Era, PaymentCategory, TimeRange, Timestamp, YearMonth};
use crate::numeric::{mean, median, KdeComparison};
use crate::worktime::{active_days, state_totals_ms, OrphanTrip, WorkingTimeDefinition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub bundles_found: usize,
    pub bundles_loaded: usize,
    pub drivers: usize,
    pub era_boundaries: String,
    pub time_zone: String,
    pub weeks: String,
    pub link_window_seconds: i64,
    pub link_skew_seconds: i64,
    pub first_month: Option<YearMonth>,
    pub last_month: Option<YearMonth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub tables: BTreeMap<TableKind, TableReport>,
    pub skipped_files: usize,
    pub failed_bundles: Vec<BundleFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkageSummary {
    pub completed_trips: usize,
    pub cancelled_trips: usize,
    pub earnings_payments: usize,
    pub linked_trips: usize,
    pub share_valid_trips: usize,
    pub unmatched_trips: usize,
    pub unmatched_payments: usize,
    pub unmatched_trip_reasons: BTreeMap<String, usize>,
    pub unmatched_payment_reasons: BTreeMap<String, usize>,
    /// Trips that could not be placed on the activity timeline.
    pub orphan_trips: usize,
    /// Linked over completed trips.
    pub linked_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EraSemantics {
    pub trips: usize,
    pub semantics: FareSemantics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PayRates {
    pub weeks: usize,
    /// Pounds.
    pub net_pay: f64,
    pub hours_tribunal: f64,
    pub hours_platform: f64,
    pub per_hour_tribunal: Option<f64>,
    pub per_hour_platform: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealPay {
    pub base: YearMonth,
    pub per_hour_tribunal: BTreeMap<YearMonth, f64>,
    pub per_hour_platform: BTreeMap<YearMonth, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaySection {
    pub overall: PayRates,
    pub yearly: BTreeMap<i32, PayRates>,
    /// Weeks count toward the month holding their Thursday.
    pub monthly: BTreeMap<YearMonth, PayRates>,
    pub real: Option<RealPay>,
    pub rpi_error: Option<String>,
}

/// Hours per driver-day in each state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilisationMonth {
    pub driver_days: usize,
    pub standby: f64,
    pub en_route: f64,
    pub on_trip: f64,
    pub standby_fraction: Option<f64>,
    pub en_route_fraction: Option<f64>,
    pub on_trip_fraction: Option<f64>,
}

impl UtilisationMonth {
    fn from_totals(ms: [i64; 3], driver_days: usize) -> Self {
        let total: i64 = ms.iter().sum();
        let per_day = |v: i64| {
            if driver_days == 0 {
                0.0
            } else {
                v as f64 / 3_600_000.0 / driver_days as f64
            }
        };
        let frac = |v: i64| (total > 0).then(|| v as f64 / total as f64);
        UtilisationMonth {
            driver_days,
            standby: per_day(ms[0]),
            en_route: per_day(ms[1]),
            on_trip: per_day(ms[2]),
            standby_fraction: frac(ms[0]),
            en_route_fraction: frac(ms[1]),
            on_trip_fraction: frac(ms[2]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilisationSection {
    pub overall: UtilisationMonth,
    pub monthly: BTreeMap<YearMonth, UtilisationMonth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TakeRateSection {
    pub linked_trips: usize,
    pub share_valid_trips: usize,
    pub histogram: ShareHistogram,
    pub by_trip: Option<TakeRateStats>,
    pub by_driver: Option<TakeRateStats>,
    pub per_minute: Vec<PerMinuteBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurplusSection {
    pub months: Vec<SurplusMonth>,
    pub series: Vec<SeriesPoint>,
}

/// Density of one per-driver quantity in each cohort group; `a` is
/// paid_less, `b` paid_same_or_more.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDensity {
    pub n_paid_less: usize,
    pub n_paid_same_or_more: usize,
    pub mean_paid_less: Option<f64>,
    pub mean_paid_same_or_more: Option<f64>,
    pub comparison: Option<KdeComparison<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSection {
    pub window_pre: MonthRange,
    pub window_post: MonthRange,
    /// False when the windows are the defaults: equal spans of up to a year
    /// either side of the dynamic-pricing boundary, ending with the last trip.
    pub windows_configured: bool,
    pub split: Option<CohortSplit>,
    pub error: Option<String>,
    /// Mean driver share in the post window.
    pub take_rate: Option<GroupDensity>,
    /// Acceptance rate in the post window.
    pub accept_rate: Option<GroupDensity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSection {
    pub offers: usize,
    pub accepted: usize,
    pub pooled: Option<f64>,
    pub drivers: usize,
    pub per_driver: BTreeMap<String, f64>,
    pub per_driver_mean: Option<f64>,
    pub per_driver_median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub meta: Meta,
    pub ingest: IngestSummary,
    pub linkage: LinkageSummary,
    pub fare_semantics: BTreeMap<Era, EraSemantics>,
    pub pay: PaySection,
    pub utilisation: UtilisationSection,
    pub take_rate: BTreeMap<Era, TakeRateSection>,
    pub surplus: SurplusSection,
    pub cohort: CohortSection,
    pub acceptance: AcceptanceSection,
    pub demographics: DemographicSummary,
}

/// Unmatched and orphaned items of one bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverLinkage {
    pub bundle: String,
    pub driver_id: DriverId,
    pub linked: usize,
    pub unmatched_trips: Vec<UnmatchedTrip>,
    pub unmatched_payments: Vec<UnmatchedPayment>,
    pub orphan_trips: Vec<OrphanTrip>,
}

impl DriverLinkage {
    pub fn of(b: &BundleOutcome) -> Self {
        DriverLinkage {
            bundle: b.name.clone(),
            driver_id: b.bundle.driver_id.clone(),
            linked: b.link.linked.len(),
            unmatched_trips: b.link.unmatched_trips.clone(),
            unmatched_payments: b.link.unmatched_payments.clone(),
            orphan_trips: b.segments.orphans.clone(),
        }
    }
}

fn all_time() -> TimeRange {
    TimeRange::new(Timestamp(i64::MIN), Timestamp(i64::MAX))
}

fn rates(rows: Vec<WeeklyPayRow>) -> PayRates {
    let mut pence = 0i64;
    let mut trib: Vec<f64> = Vec::with_capacity(rows.len());
    let mut plat: Vec<f64> = Vec::with_capacity(rows.len());
    for r in &rows {
        pence += r.net_pay.minor_units;
        trib.push(r.hours_tribunal);
        plat.push(r.hours_platform);
    }
    let sorted_sum = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite hours"));
        v.iter().sum::<f64>()
    };
    PayRates {
        weeks: rows.len(),
        net_pay: pence as f64 / 100.0,
        hours_tribunal: sorted_sum(trib),
        hours_platform: sorted_sum(plat),
        per_hour_tribunal: pay_per_hour(&rows, None, WorkingTimeDefinition::Tribunal).ok(),
        per_hour_platform: pay_per_hour(&rows, None, WorkingTimeDefinition::Platform).ok(),
    }
}

fn pay_section(bundles: &[BundleOutcome], config: &AuditConfig, last_month: Option<YearMonth>) -> PaySection {
    let rows: Vec<WeeklyPayRow> = bundles.iter().flat_map(|b| b.weeks.iter().cloned()).collect();
    let mut by_month: BTreeMap<YearMonth, Vec<WeeklyPayRow>> = BTreeMap::new();
    let mut by_year: BTreeMap<i32, Vec<WeeklyPayRow>> = BTreeMap::new();
    for r in &rows {
        let m = r.iso_week.month();
        by_month.entry(m).or_default().push(r.clone());
        by_year.entry(m.year).or_default().push(r.clone());
    }
    let monthly: BTreeMap<YearMonth, PayRates> = by_month.into_iter().map(|(m, rs)| (m, rates(rs))).collect();
    let yearly = by_year.into_iter().map(|(y, rs)| (y, rates(rs))).collect();

    let (mut real, mut rpi_error) = (None, None);
    if let Some(rpi) = &config.rpi {
        let base = config
            .rpi_base
            .or(last_month)
            .or_else(|| monthly.keys().next_back().copied());
        if let Some(base) = base {
            let series = |f: fn(&PayRates) -> Option<f64>| -> BTreeMap<YearMonth, f64> {
                monthly.iter().filter_map(|(&m, r)| f(r).map(|v| (m, v))).collect()
            };
            let trib = adjust_inflation(&series(|r| r.per_hour_tribunal), rpi, base);
            let plat = adjust_inflation(&series(|r| r.per_hour_platform), rpi, base);
            match (trib, plat) {
                (Ok(t), Ok(p)) => {
                    real = Some(RealPay {
                        base,
                        per_hour_tribunal: t,
                        per_hour_platform: p,
                    })
                }
                (Err(e), _) | (_, Err(e)) => rpi_error = Some(e.to_string()),
            }
        }
    }

    PaySection {
        overall: rates(rows),
        yearly,
        monthly,
        real,
        rpi_error,
    }
}

fn utilisation_section(bundles: &[BundleOutcome], calendar: &Calendar) -> UtilisationSection {
    let mut monthly_acc: BTreeMap<YearMonth, ([i64; 3], usize)> = BTreeMap::new();
    for b in bundles {
        let segs = &b.segments.segments;
        let (Some(first), Some(last)) = (
            segs.iter().map(|s| s.start_ts).min(),
            segs.iter().map(|s| Timestamp(s.end_ts.0 - 1)).max(),
        ) else {
            continue;
        };
        for month in calendar.month(first).through(calendar.month(last)) {
            let range = calendar.month_range(month);
            let totals = state_totals_ms(segs, &range);
            let days = active_days(segs, &range, calendar).len();
            let slot = monthly_acc.entry(month).or_insert(([0; 3], 0));
            for (acc, t) in slot.0.iter_mut().zip(totals) {
                *acc += t;
            }
            slot.1 += days;
        }
    }
    let mut all = ([0i64; 3], 0usize);
    for (ms, days) in monthly_acc.values() {
        for (acc, t) in all.0.iter_mut().zip(ms) {
            *acc += t;
        }
        all.1 += days;
    }
    UtilisationSection {
        overall: UtilisationMonth::from_totals(all.0, all.1),
        monthly: monthly_acc
            .into_iter()
            .map(|(m, (ms, d))| (m, UtilisationMonth::from_totals(ms, d)))
            .collect(),
    }
}

fn take_rate_section(linked: &[LinkedTrip], config: &AuditConfig) -> BTreeMap<Era, TakeRateSection> {
    let mut by_era: BTreeMap<Era, Vec<LinkedTrip>> = BTreeMap::new();
    for l in linked {
        by_era.entry(l.era).or_default().push(l.clone());
    }
    by_era
        .into_iter()
        .map(|(era, ls)| {
            let section = TakeRateSection {
                linked_trips: ls.len(),
                share_valid_trips: ls.iter().filter(|l| l.has_share()).count(),
                histogram: take_rate_histogram(&ls, &config.share_bins),
                by_trip: take_rate_stats(&ls, GroupBy::Trip, config.share_threshold).ok(),
                by_driver: take_rate_stats(&ls, GroupBy::Driver, config.share_threshold).ok(),
                per_minute: per_minute_fare_by_split(&ls, &config.share_bins),
            };
            (era, section)
        })
        .collect()
}

fn group_density(values: &BTreeMap<DriverId, f64>, split: &CohortSplit) -> GroupDensity {
    let mut less = Vec::new();
    let mut more = Vec::new();
    for d in &split.drivers {
        if let Some(&v) = values.get(&d.driver_id) {
            match d.group {
                CohortGroup::PaidLess => less.push(v),
                CohortGroup::PaidSameOrMore => more.push(v),
            }
        }
    }
    GroupDensity {
        n_paid_less: less.len(),
        n_paid_same_or_more: more.len(),
        mean_paid_less: mean(&less),
        mean_paid_same_or_more: mean(&more),
        comparison: distribution_compare(&less, &more).ok(),
    }
}

fn cohort_section(bundles: &[BundleOutcome], config: &AuditConfig) -> CohortSection {
    let calendar = &config.link.calendar;
    let dyn_from = config.link.eras.dynamic_from;
    let (pre, post, configured) = match (config.cohort_pre, config.cohort_post) {
        (Some(a), Some(b)) => (a, b, true),
        _ => {
            // up to a year either side of the boundary, cut at the last month
            // with a completed trip
            let last_month = bundles
                .iter()
                .flat_map(|b| b.bundle.trips.iter())
                .filter(|t| t.is_completed())
                .map(|t| calendar.month(t.request_ts))
                .max();
            let post_last = last_month
                .map(|m| m.min(dyn_from.plus_months(11)))
                .unwrap_or(dyn_from.plus_months(11))
                .max(dyn_from);
            let n = dyn_from.months_until(post_last) + 1;
            (
                MonthRange {
                    first: dyn_from.plus_months(-n),
                    last: dyn_from.prev(),
                },
                MonthRange {
                    first: dyn_from,
                    last: post_last,
                },
                false,
            )
        }
    };
    let rows: Vec<WeeklyPayRow> = bundles.iter().flat_map(|b| b.weeks.iter().cloned()).collect();
    let trips: Vec<_> = bundles.iter().flat_map(|b| b.bundle.trips.iter().cloned()).collect();
    let mut section = CohortSection {
        window_pre: pre,
        window_post: post,
        windows_configured: configured,
        split: None,
        error: None,
        take_rate: None,
        accept_rate: None,
    };
    let split = match cohort_pay_change(&rows, &trips, pre, post, calendar) {
        Ok(s) => s,
        Err(e) => {
            section.error = Some(e.to_string());
            return section;
        }
    };

    let post_range = calendar.months_range(post.first, post.last);
    let mut shares: BTreeMap<DriverId, f64> = BTreeMap::new();
    let mut accepts: BTreeMap<DriverId, f64> = BTreeMap::new();
    for b in bundles {
        let s: Vec<f64> = b
            .link
            .linked
            .iter()
            .filter(|l| post_range.contains(l.trip.request_ts))
            .filter_map(|l| l.driver_share)
            .collect();
        if let Some(m) = mean(&s) {
            shares.insert(b.bundle.driver_id.clone(), m);
        }
        if let Ok(r) = acceptance_rate(&b.bundle.dispatches, &post_range) {
            accepts.insert(b.bundle.driver_id.clone(), r);
        }
    }
    section.take_rate = Some(group_density(&shares, &split));
    section.accept_rate = Some(group_density(&accepts, &split));
    section.split = Some(split);
    section
}

fn acceptance_section(bundles: &[BundleOutcome]) -> AcceptanceSection {
    let mut offers = 0;
    let mut accepted = 0;
    let mut per_driver = BTreeMap::new();
    for b in bundles {
        offers += b.bundle.dispatches.len();
        accepted += b.bundle.dispatches.iter().filter(|d| d.accepted).count();
        if let Ok(r) = acceptance_rate(&b.bundle.dispatches, &all_time()) {
            per_driver.insert(b.bundle.driver_id.as_str().to_string(), r);
        }
    }
    let rates: Vec<f64> = per_driver.values().copied().collect();
    AcceptanceSection {
        offers,
        accepted,
        pooled: (offers > 0).then(|| accepted as f64 / offers as f64),
        drivers: per_driver.len(),
        per_driver_mean: mean(&rates),
        per_driver_median: median(&rates),
        per_driver,
    }
}

fn linkage_summary(bundles: &[BundleOutcome]) -> LinkageSummary {
    let mut s = LinkageSummary::default();
    for b in bundles {
        s.completed_trips += b.bundle.trips.iter().filter(|t| t.is_completed()).count();
        s.cancelled_trips += b.bundle.trips.iter().filter(|t| t.status.is_cancelled()).count();
        s.earnings_payments += b
            .bundle
            .payments
            .iter()
            .filter(|p| p.category == PaymentCategory::TripEarnings)
            .count();
        s.linked_trips += b.link.linked.len();
        s.share_valid_trips += b.link.linked.iter().filter(|l| l.has_share()).count();
        s.unmatched_trips += b.link.unmatched_trips.len();
        s.unmatched_payments += b.link.unmatched_payments.len();
        for u in &b.link.unmatched_trips {
            *s.unmatched_trip_reasons.entry(u.reason.clone()).or_default() += 1;
        }
        for u in &b.link.unmatched_payments {
            *s.unmatched_payment_reasons.entry(u.reason.clone()).or_default() += 1;
        }
        s.orphan_trips += b.segments.orphans.len();
    }
    s.linked_fraction = (s.completed_trips > 0).then(|| s.linked_trips as f64 / s.completed_trips as f64);
    s
}

/// Assembles the pooled report. `bundles` must be in directory order.
pub fn build_report(bundles: &[BundleOutcome], failures: &[BundleFailure], config: &AuditConfig) -> AuditReport {
    let calendar = &config.link.calendar;

    let months: BTreeSet<YearMonth> = bundles
        .iter()
        .flat_map(|b| {
            b.bundle
                .trips
                .iter()
                .map(|t| t.request_ts)
                .chain(b.bundle.payments.iter().map(|p| p.ts))
        })
        .map(|ts| calendar.month(ts))
        .collect();
    let (first_month, last_month) = (months.first().copied(), months.last().copied());
    let drivers: BTreeSet<&DriverId> = bundles.iter().map(|b| &b.bundle.driver_id).collect();

    let meta = Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        bundles_found: bundles.len() + failures.len(),
        bundles_loaded: bundles.len(),
        drivers: drivers.len(),
        era_boundaries: config.link.eras.to_string(),
        time_zone: calendar.zone.name().to_string(),
        weeks: "iso".to_string(),
        link_window_seconds: config.link.window_seconds,
        link_skew_seconds: config.link.skew_seconds,
        first_month,
        last_month,
    };

    let mut tables: BTreeMap<TableKind, TableReport> = BTreeMap::new();
    for b in bundles {
        for (&k, t) in &b.ingest.tables {
            let slot = tables.entry(k).or_default();
            slot.rows_in += t.rows_in;
            slot.normalized += t.normalized;
            slot.deduplicated += t.deduplicated;
            slot.quarantined += t.quarantined;
            slot.malformed += t.malformed;
        }
    }
    let ingest = IngestSummary {
        tables,
        skipped_files: bundles.iter().map(|b| b.ingest.skipped_files.len()).sum(),
        failed_bundles: failures.to_vec(),
    };

    let mut fare_semantics: BTreeMap<Era, EraSemantics> = BTreeMap::new();
    for b in bundles {
        let rep = detect_fare_semantics(&b.bundle.trips, &config.link.eras, calendar);
        for t in &b.bundle.trips {
            let era = config.link.eras.era_of(t.request_ts, calendar);
            let entry = fare_semantics.entry(era).or_insert(EraSemantics {
                trips: 0,
                semantics: rep.per_era[&era],
            });
            entry.trips += 1;
        }
    }

    let linked: Vec<LinkedTrip> = bundles.iter().flat_map(|b| b.link.linked.iter().cloned()).collect();
    let segments: Vec<_> = bundles
        .iter()
        .flat_map(|b| b.segments.segments.iter().cloned())
        .collect();
    let surplus = {
        let share_months: BTreeSet<YearMonth> = linked.iter().map(|l| calendar.month(l.trip.request_ts)).collect();
        match (share_months.first(), share_months.last()) {
            (Some(&a), Some(&b)) => {
                let (months, series) = surplus_series(&linked, &segments, a, b, calendar);
                SurplusSection { months, series }
            }
            _ => SurplusSection {
                months: Vec::new(),
                series: Vec::new(),
            },
        }
    };

    let profiles: Vec<_> = bundles.iter().filter_map(|b| b.bundle.profile.clone()).collect();

    AuditReport {
        meta,
        ingest,
        linkage: linkage_summary(bundles),
        fare_semantics,
        pay: pay_section(bundles, config, last_month),
        utilisation: utilisation_section(bundles, calendar),
        take_rate: take_rate_section(&linked, config),
        surplus,
        cohort: cohort_section(bundles, config),
        acceptance: acceptance_section(bundles),
        demographics: cohort_summary(&profiles),
    }
}
