//! Joining trip-earnings payments to trips by timestamp proximity.
//!
//! Exports carry no shared trip id, so a payment is attributed to the trip
//! whose dropoff is nearest in time. Earnings events posted at the same
//! instant form one group (a trip paid as several line items) and are
//! matched together. Matching is a greedy sweep over all (group, trip)
//! candidate pairs inside the window, ordered by
//! `|payment.ts - dropoff_ts|`, then earlier payment time, then earlier
//! dropoff, then input order. Each group links to at most one trip and each
//! trip to at most one group. Because shrinking the window only removes pairs
//! from the tail of that order, a smaller window never produces a pair the
//! larger window did not.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::fare_semantics_for;
use crate::model::{Calendar, Era, EraBoundaries, Money, PaymentCategory, PaymentEvent, Timestamp, TripRecord};

pub const DEFAULT_WINDOW_SECONDS: i64 = 600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("rider fare is not reliable in this era")]
    UnreliableFare,
    #[error("rider fare missing")]
    MissingFare,
    #[error("rider fare is zero or negative")]
    ZeroFare,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    /// Largest accepted delay of a payment after dropoff, in seconds.
    pub window_seconds: i64,
    /// Largest accepted lead of a payment before dropoff (clock skew), in seconds.
    pub skew_seconds: i64,
    pub eras: EraBoundaries,
    pub calendar: Calendar,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            window_seconds: DEFAULT_WINDOW_SECONDS,
            skew_seconds: 0,
            eras: EraBoundaries::default(),
            calendar: Calendar::default(),
        }
    }
}

/// A trip with the earnings attributed to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedTrip {
    pub trip: TripRecord,
    pub era: Era,
    pub earnings: Vec<PaymentEvent>,
    pub driver_total: Money,
    /// The exported fare, when it represents the rider's price.
    pub rider_fare: Option<Money>,
    pub driver_share: Option<f64>,
    pub platform_share: Option<f64>,
}

impl LinkedTrip {
    /// Builds a linked trip, deriving the split when the fare allows it.
    pub fn new(trip: TripRecord, earnings: Vec<PaymentEvent>, eras: &EraBoundaries, calendar: &Calendar) -> Self {
        let era = eras.era_of(trip.request_ts, calendar);
        let currency = earnings
            .first()
            .map(|p| p.amount.currency)
            .or(trip.original_fare.map(|f| f.currency))
            .unwrap_or_default();
        let driver_total = earnings
            .iter()
            .try_fold(Money::zero(currency), |acc, p| acc.checked_add(p.amount))
            .unwrap_or(Money::zero(currency));
        let rider_fare = if fare_semantics_for(era).is_reliable() {
            trip.original_fare
        } else {
            None
        };
        let mut linked = LinkedTrip {
            trip,
            era,
            earnings,
            driver_total,
            rider_fare,
            driver_share: None,
            platform_share: None,
        };
        if let Ok((d, p)) = split(&linked) {
            linked.driver_share = Some(d);
            linked.platform_share = Some(p);
        }
        linked
    }

    pub fn has_share(&self) -> bool {
        self.driver_share.is_some()
    }

    pub fn on_trip_minutes(&self) -> Option<f64> {
        self.trip.on_trip_ms().map(|ms| ms as f64 / 60_000.0)
    }
}

/// Driver and platform fractions of the rider fare.
///
/// The driver share is `driver_total / rider_fare` and may exceed one, in
/// which case the platform share is negative.
pub fn split(linked: &LinkedTrip) -> Result<(f64, f64), LinkError> {
    if !fare_semantics_for(linked.era).is_reliable() {
        return Err(LinkError::UnreliableFare);
    }
    let fare = linked.rider_fare.ok_or(LinkError::MissingFare)?;
    if fare.minor_units <= 0 {
        return Err(LinkError::ZeroFare);
    }
    let driver = linked.driver_total.minor_units as f64 / fare.minor_units as f64;
    Ok((driver, 1.0 - driver))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedTrip {
    pub trip: TripRecord,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedPayment {
    pub payment: PaymentEvent,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub linked: Vec<LinkedTrip>,
    pub unmatched_trips: Vec<UnmatchedTrip>,
    pub unmatched_payments: Vec<UnmatchedPayment>,
}

struct Group {
    ts: Timestamp,
    first_index: usize,
    members: Vec<usize>,
}

/// Links one driver's trip-earnings payments to their trips.
///
/// Non-earnings payments (tips, promotions, fees) take no part. Cancelled
/// trips are reported as unmatched.
pub fn link(trips: &[TripRecord], payments: &[PaymentEvent], config: &LinkConfig) -> LinkResult {
    let window_ms = config.window_seconds.max(0) * 1000;
    let skew_ms = config.skew_seconds.max(0) * 1000;

    // earnings grouped by identical timestamp
    let mut earning_idx: Vec<usize> = payments
        .iter()
        .enumerate()
        .filter(|(_, p)| p.category == PaymentCategory::TripEarnings)
        .map(|(i, _)| i)
        .collect();
    // content before position, so same-instant line items come out in a
    // fixed order whatever the input order
    earning_idx.sort_by(|&a, &b| {
        let (pa, pb) = (&payments[a], &payments[b]);
        (pa.ts, pa.amount, &pa.memo, a).cmp(&(pb.ts, pb.amount, &pb.memo, b))
    });
    let mut groups: Vec<Group> = Vec::new();
    for i in earning_idx {
        match groups.last_mut() {
            Some(g) if g.ts == payments[i].ts => g.members.push(i),
            _ => groups.push(Group {
                ts: payments[i].ts,
                first_index: i,
                members: vec![i],
            }),
        }
    }

    // completed trips sorted by dropoff
    let mut by_dropoff: Vec<(Timestamp, usize)> = trips
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_completed())
        .filter_map(|(i, t)| t.dropoff_ts.map(|d| (d, i)))
        .collect();
    by_dropoff.sort();

    // (|offset|, payment ts, payment index, dropoff, trip index, group index)
    let mut candidates: Vec<(i64, Timestamp, usize, Timestamp, usize, usize)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        // payment.ts - dropoff ∈ [-skew, window]  ⇔  dropoff ∈ [ts - window, ts + skew]
        let lo = Timestamp(g.ts.0 - window_ms);
        let hi = Timestamp(g.ts.0 + skew_ms);
        let start = by_dropoff.partition_point(|&(d, _)| d < lo);
        for &(d, ti) in by_dropoff[start..].iter().take_while(|&&(d, _)| d <= hi) {
            candidates.push(((g.ts.0 - d.0).abs(), g.ts, g.first_index, d, ti, gi));
        }
    }
    candidates.sort();

    let mut trip_match: Vec<Option<usize>> = vec![None; trips.len()];
    let mut group_match: Vec<Option<usize>> = vec![None; groups.len()];
    let mut trip_had_candidate = vec![false; trips.len()];
    let mut group_had_candidate = vec![false; groups.len()];
    for &(_, _, _, _, ti, gi) in &candidates {
        trip_had_candidate[ti] = true;
        group_had_candidate[gi] = true;
        if trip_match[ti].is_none() && group_match[gi].is_none() {
            trip_match[ti] = Some(gi);
            group_match[gi] = Some(ti);
        }
    }

    let mut result = LinkResult::default();
    let mut linked_order: Vec<(Timestamp, Timestamp, usize)> = Vec::new();
    for (ti, trip) in trips.iter().enumerate() {
        match trip_match[ti] {
            Some(_) => linked_order.push((trip.dropoff_ts.unwrap_or(trip.request_ts), trip.request_ts, ti)),
            None => {
                let reason = if !trip.is_completed() {
                    "trip not completed"
                } else if trip_had_candidate[ti] {
                    "every candidate payment claimed by a nearer trip"
                } else {
                    "no earnings payment within window"
                };
                result.unmatched_trips.push(UnmatchedTrip {
                    trip: trip.clone(),
                    reason: reason.to_string(),
                });
            }
        }
    }
    linked_order.sort();
    for (_, _, ti) in linked_order {
        let gi = trip_match[ti].expect("matched");
        let earnings = groups[gi].members.iter().map(|&pi| payments[pi].clone()).collect();
        result.linked.push(LinkedTrip::new(
            trips[ti].clone(),
            earnings,
            &config.eras,
            &config.calendar,
        ));
    }
    for (gi, g) in groups.iter().enumerate() {
        if group_match[gi].is_none() {
            let reason = if group_had_candidate[gi] {
                "every candidate trip claimed by a nearer payment"
            } else {
                "no completed trip within window"
            };
            for &pi in &g.members {
                result.unmatched_payments.push(UnmatchedPayment {
                    payment: payments[pi].clone(),
                    reason: reason.to_string(),
                });
            }
        }
    }
    result
}
