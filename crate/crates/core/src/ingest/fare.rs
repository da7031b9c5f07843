use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Calendar, Era, EraBoundaries, TripRecord};

/// Whether a trip's exported fare is the rider's price.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FareSemantics {
    FareIsRiderPrice,
    FareUnreliable,
}

impl FareSemantics {
    pub fn is_reliable(&self) -> bool {
        matches!(self, FareSemantics::FareIsRiderPrice)
    }
}

pub fn fare_semantics_for(era: Era) -> FareSemantics {
    match era {
        Era::OpaqueGap => FareSemantics::FareUnreliable,
        Era::FixedCommission | Era::DynamicPricing => FareSemantics::FareIsRiderPrice,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FareSemanticsReport {
    /// Aligned with the input trips.
    pub per_trip: Vec<FareSemantics>,
    /// Flag for every era that occurs in the input.
    pub per_era: BTreeMap<Era, FareSemantics>,
}

/// Flags trips whose exported fare cannot be used as the rider's price.
/// A trip's era is taken from its request time.
pub fn detect_fare_semantics(trips: &[TripRecord], eras: &EraBoundaries, calendar: &Calendar) -> FareSemanticsReport {
    let mut per_era = BTreeMap::new();
    let per_trip = trips
        .iter()
        .map(|t| {
            let era = eras.era_of(t.request_ts, calendar);
            let sem = fare_semantics_for(era);
            per_era.insert(era, sem);
            sem
        })
        .collect();
    FareSemanticsReport { per_trip, per_era }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriverId, Money, Timestamp, TripStatus};

    fn trip_at(s: &str) -> TripRecord {
        let t = Calendar::default().parse_timestamp(s).unwrap();
        TripRecord {
            driver_id: DriverId::new("d"),
            request_ts: t,
            accept_ts: Some(t),
            pickup_ts: Some(t),
            dropoff_ts: Some(Timestamp(t.0 + 60_000)),
            cancel_ts: None,
            distance_miles: 1.0,
            status: TripStatus::Completed,
            original_fare: Some(Money::gbp(500)),
            origin_tag: String::new(),
            dest_tag: String::new(),
            product: String::new(),
            pickup_address: None,
            dropoff_address: None,
            vehicle_plate: None,
        }
    }

    #[test]
    fn flags_by_era() {
        let trips = [
            trip_at("2022-06-10T12:00:00Z"),
            trip_at("2023-06-10T12:00:00Z"),
            trip_at("2019-01-10T12:00:00Z"),
        ];
        let r = detect_fare_semantics(&trips, &EraBoundaries::default(), &Calendar::default());
        assert_eq!(
            r.per_trip,
            vec![
                FareSemantics::FareUnreliable,
                FareSemantics::FareIsRiderPrice,
                FareSemantics::FareIsRiderPrice
            ]
        );
        assert_eq!(r.per_era.len(), 3);
        assert_eq!(r.per_era[&Era::OpaqueGap], FareSemantics::FareUnreliable);
    }
}
