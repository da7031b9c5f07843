use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::{
    ActivitySegment, Calendar, Currency, DriverId, IsoWeek, Money, PaymentEvent, SegmentState, Timestamp, YearMonth,
};
use crate::worktime::WorkingTimeDefinition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeeklyPayRow {
    pub driver_id: DriverId,
    pub iso_week: IsoWeek,
    pub net_pay: Money,
    pub hours_tribunal: f64,
    pub hours_platform: f64,
}

impl WeeklyPayRow {
    pub fn hours(&self, definition: WorkingTimeDefinition) -> f64 {
        match definition {
            WorkingTimeDefinition::Tribunal => self.hours_tribunal,
            WorkingTimeDefinition::Platform => self.hours_platform,
        }
    }
}

/// Inclusive range of ISO weeks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekRange {
    pub first: IsoWeek,
    pub last: IsoWeek,
}

impl WeekRange {
    pub fn contains(&self, w: IsoWeek) -> bool {
        self.first <= w && w <= self.last
    }
}

/// Signed sum of every payment in the ISO week, whatever its category.
pub fn weekly_pay(payments: &[PaymentEvent], week: IsoWeek, calendar: &Calendar) -> Result<Money, MetricsError> {
    let range = calendar.week_range(week);
    let currency = payments.first().map(|p| p.amount.currency).unwrap_or(Currency::GBP);
    let total = Money::sum(
        currency,
        payments.iter().filter(|p| range.contains(p.ts)).map(|p| &p.amount),
    )?;
    Ok(total)
}

/// One row per ISO week touched by a payment or an activity segment.
pub fn weekly_rows(
    driver: &DriverId,
    payments: &[PaymentEvent],
    segments: &[ActivitySegment],
    calendar: &Calendar,
) -> Result<Vec<WeeklyPayRow>, MetricsError> {
    let currency = payments.first().map(|p| p.amount.currency).unwrap_or(Currency::GBP);
    let mut pay: BTreeMap<IsoWeek, Money> = BTreeMap::new();
    for p in payments {
        let slot = pay.entry(calendar.iso_week(p.ts)).or_insert(Money::zero(currency));
        *slot = slot.checked_add(p.amount)?;
    }
    // [tribunal_ms, platform_ms]
    let mut hours: BTreeMap<IsoWeek, [i64; 2]> = BTreeMap::new();
    for s in segments {
        let mut cursor = s.start_ts;
        while cursor < s.end_ts {
            let week = calendar.iso_week(cursor);
            let end = calendar.week_range(week).end.min(s.end_ts);
            let ms = end.0 - cursor.0;
            let slot = hours.entry(week).or_insert([0, 0]);
            slot[0] += ms;
            if s.state != SegmentState::Standby {
                slot[1] += ms;
            }
            cursor = Timestamp(end.0.max(cursor.0 + 1));
        }
    }
    let weeks: std::collections::BTreeSet<IsoWeek> = pay.keys().chain(hours.keys()).copied().collect();
    Ok(weeks
        .into_iter()
        .map(|w| {
            let h = hours.get(&w).copied().unwrap_or([0, 0]);
            WeeklyPayRow {
                driver_id: driver.clone(),
                iso_week: w,
                net_pay: pay.get(&w).copied().unwrap_or(Money::zero(currency)),
                hours_tribunal: h[0] as f64 / 3_600_000.0,
                hours_platform: h[1] as f64 / 3_600_000.0,
            }
        })
        .collect())
}

fn pooled<'a>(
    rows: impl Iterator<Item = &'a WeeklyPayRow>,
    definition: WorkingTimeDefinition,
) -> Result<f64, MetricsError> {
    let mut pence: i64 = 0;
    let mut hours: Vec<f64> = Vec::new();
    for r in rows {
        pence += r.net_pay.minor_units;
        hours.push(r.hours(definition));
    }
    // fixed summation order keeps the result independent of row order
    hours.sort_by(|a, b| a.partial_cmp(b).expect("finite hours"));
    let total_hours: f64 = hours.iter().sum();
    if total_hours <= 0.0 {
        return Err(MetricsError::ZeroHours);
    }
    Ok(pence as f64 / 100.0 / total_hours)
}

/// Pooled pay per hour, `Σ net pay / Σ hours`, over the rows inside `period`
/// (all rows when `None`).
pub fn pay_per_hour(
    rows: &[WeeklyPayRow],
    period: Option<&WeekRange>,
    definition: WorkingTimeDefinition,
) -> Result<f64, MetricsError> {
    pooled(
        rows.iter()
            .filter(|r| period.map(|p| p.contains(r.iso_week)).unwrap_or(true)),
        definition,
    )
}

/// Pooled pay per hour per calendar month; each week counts toward the month
/// holding its Thursday. Months with no hours are omitted.
pub fn monthly_pay_per_hour(rows: &[WeeklyPayRow], definition: WorkingTimeDefinition) -> BTreeMap<YearMonth, f64> {
    let mut by_month: BTreeMap<YearMonth, Vec<&WeeklyPayRow>> = BTreeMap::new();
    for r in rows {
        by_month.entry(r.iso_week.month()).or_default().push(r);
    }
    by_month
        .into_iter()
        .filter_map(|(m, rs)| pooled(rs.into_iter(), definition).ok().map(|v| (m, v)))
        .collect()
}
