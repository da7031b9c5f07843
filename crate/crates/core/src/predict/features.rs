use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::linkage::LinkedTrip;
use crate::model::Calendar;
use crate::numeric::Scalar;

/// Product names with their own one-hot column, in column order.
pub const DEFAULT_PRODUCTS: [&str; 4] = ["uberx", "comfort", "xl", "exec"];

const WEEKDAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/// Hours counted as night for the interaction terms.
fn is_night(hour: u32) -> bool {
    !(6..22).contains(&hour)
}

/// Ordered feature names for trip-pay regression.
///
/// Layout: on-trip minutes, en-route minutes, distance; hour-of-day one-hot
/// (24); day-of-week one-hot, Monday first (7); month one-hot (12); product
/// one-hot; airport origin and destination flags; then squared and
/// interaction terms. With the default four products there are 64 columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    products: Vec<String>,
    names: Vec<String>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema::new(DEFAULT_PRODUCTS.iter().map(|s| s.to_string()).collect()).expect("distinct products")
    }
}

impl FeatureSchema {
    pub const ON_TRIP: usize = 0;
    pub const EN_ROUTE: usize = 1;
    pub const DISTANCE: usize = 2;
    pub const HOUR: usize = 3;
    pub const WEEKDAY: usize = 27;
    pub const MONTH: usize = 34;
    pub const PRODUCT: usize = 46;

    /// `None` if product names repeat (case-insensitively).
    pub fn new(products: Vec<String>) -> Option<Self> {
        let products: Vec<String> = products.into_iter().map(|p| p.to_ascii_lowercase()).collect();
        if products.iter().collect::<BTreeSet<_>>().len() != products.len() {
            return None;
        }
        let mut names: Vec<String> = vec!["on_trip_min".into(), "en_route_min".into(), "distance_mi".into()];
        names.extend((0..24).map(|h| format!("hour_{h:02}")));
        names.extend(WEEKDAYS.iter().map(|d| format!("dow_{d}")));
        names.extend((1..=12).map(|m| format!("month_{m:02}")));
        names.extend(products.iter().map(|p| format!("product_{p}")));
        names.extend(
            [
                "airport_origin",
                "airport_dest",
                "distance_sq",
                "on_trip_sq",
                "en_route_sq",
                "distance_x_on_trip",
                "distance_x_airport_origin",
                "distance_x_airport_dest",
                "on_trip_x_airport_origin",
                "on_trip_x_airport_dest",
                "distance_x_weekend",
                "on_trip_x_weekend",
                "distance_x_night",
                "on_trip_x_night",
            ]
            .map(String::from),
        );
        Some(FeatureSchema { products, names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn product_index(&self, product: &str) -> Option<usize> {
        self.products
            .iter()
            .position(|p| p.eq_ignore_ascii_case(product.trim()))
    }
}

/// A trip's features and regression target (driver pay in major units).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub target: T,
}

/// Encodes a completed trip. Clock features come from the pickup time in the
/// calendar's zone. Unknown products leave the product block at zero.
pub fn featurize<T: Scalar>(
    linked: &LinkedTrip,
    schema: &FeatureSchema,
    calendar: &Calendar,
) -> Result<FeatureVector<T>, PredictError> {
    let t = &linked.trip;
    let (Some(on_ms), Some(route_ms), Some(pickup)) = (t.on_trip_ms(), t.en_route_ms(), t.pickup_ts) else {
        return Err(PredictError::IncompleteTrip);
    };
    if !t.is_completed() || on_ms < 0 || route_ms < 0 {
        return Err(PredictError::IncompleteTrip);
    }
    let on = on_ms as f64 / 60_000.0;
    let route = route_ms as f64 / 60_000.0;
    let dist = t.distance_miles;
    let hour = calendar.hour(pickup);
    let dow = calendar.weekday(pickup);
    let month = calendar.month(pickup).month;
    let ao = t.is_airport_origin() as u8 as f64;
    let ad = t.is_airport_dest() as u8 as f64;
    let weekend = (dow >= 5) as u8 as f64;
    let night = is_night(hour) as u8 as f64;

    let mut v = vec![0.0f64; schema.len()];
    v[FeatureSchema::ON_TRIP] = on;
    v[FeatureSchema::EN_ROUTE] = route;
    v[FeatureSchema::DISTANCE] = dist;
    v[FeatureSchema::HOUR + hour as usize] = 1.0;
    v[FeatureSchema::WEEKDAY + dow as usize] = 1.0;
    v[FeatureSchema::MONTH + month as usize - 1] = 1.0;
    if let Some(p) = schema.product_index(&t.product) {
        v[FeatureSchema::PRODUCT + p] = 1.0;
    }
    let tail = FeatureSchema::PRODUCT + schema.products.len();
    let extra = [
        ao,
        ad,
        dist * dist,
        on * on,
        route * route,
        dist * on,
        dist * ao,
        dist * ad,
        on * ao,
        on * ad,
        dist * weekend,
        on * weekend,
        dist * night,
        on * night,
    ];
    v[tail..].copy_from_slice(&extra);
    Ok(FeatureVector {
        values: v.into_iter().map(T::of).collect(),
        target: T::of(linked.driver_total.as_major_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriverId, EraBoundaries, Money, PaymentCategory, PaymentEvent, TripRecord, TripStatus};

    fn cal() -> Calendar {
        Calendar::default()
    }

    fn trip(pickup: &str, minutes: i64, miles: f64, origin: &str) -> LinkedTrip {
        let p = cal().parse_timestamp(pickup).unwrap();
        let trip = TripRecord {
            driver_id: DriverId::new("d"),
            request_ts: p.plus_secs(-300),
            accept_ts: Some(p.plus_secs(-240)),
            pickup_ts: Some(p),
            dropoff_ts: Some(p.plus_secs(minutes * 60)),
            cancel_ts: None,
            distance_miles: miles,
            status: TripStatus::Completed,
            original_fare: Some(Money::gbp(2000)),
            origin_tag: origin.into(),
            dest_tag: String::new(),
            product: "XL".into(),
            pickup_address: None,
            dropoff_address: None,
            vehicle_plate: None,
        };
        let pay = PaymentEvent {
            driver_id: DriverId::new("d"),
            ts: p.plus_secs(minutes * 60 + 30),
            category: PaymentCategory::TripEarnings,
            amount: Money::gbp(1500),
            memo: None,
        };
        LinkedTrip::new(trip, vec![pay], &EraBoundaries::default(), &cal())
    }

    #[test]
    fn direct_encoding() {
        let schema = FeatureSchema::default();
        assert_eq!(schema.len(), 64);
        let names: BTreeSet<_> = schema.names().iter().collect();
        assert_eq!(names.len(), 64);

        // Tuesday 7 Nov 2023, 08:00 GMT
        let f: FeatureVector<f64> = featurize(&trip("2023-11-07T08:00:00Z", 30, 10.0, ""), &schema, &cal()).unwrap();
        assert_eq!(f.values.len(), 64);
        assert_eq!(f.values[FeatureSchema::ON_TRIP], 30.0);
        assert_eq!(f.values[FeatureSchema::EN_ROUTE], 4.0);
        assert_eq!(f.values[FeatureSchema::DISTANCE], 10.0);
        assert_eq!(f.values[FeatureSchema::HOUR + 8], 1.0);
        assert_eq!(
            f.values[FeatureSchema::HOUR..FeatureSchema::WEEKDAY]
                .iter()
                .sum::<f64>(),
            1.0
        );
        assert_eq!(f.values[FeatureSchema::WEEKDAY + 1], 1.0);
        assert_eq!(f.values[FeatureSchema::MONTH + 10], 1.0);
        assert_eq!(f.values[FeatureSchema::PRODUCT + 2], 1.0);
        assert_eq!(f.values[50], 0.0);
        assert_eq!(f.target, 15.0);
    }

    #[test]
    fn airport_and_local_hour() {
        let schema = FeatureSchema::default();
        // 07:30 UTC in July is 08:30 in London
        let f: FeatureVector<f32> =
            featurize(&trip("2023-07-04T07:30:00Z", 10, 2.0, "airport"), &schema, &cal()).unwrap();
        assert_eq!(f.values[FeatureSchema::HOUR + 8], 1.0);
        assert_eq!(f.values[50], 1.0);
        let i = schema
            .names()
            .iter()
            .position(|n| n == "distance_x_airport_origin")
            .unwrap();
        assert_eq!(f.values[i], 2.0);
    }

    #[test]
    fn incomplete_rejected() {
        let mut l = trip("2023-07-04T07:30:00Z", 10, 2.0, "");
        l.trip.status = TripStatus::RiderCancelled;
        assert_eq!(
            featurize::<f64>(&l, &FeatureSchema::default(), &cal()),
            Err(PredictError::IncompleteTrip)
        );
        assert!(FeatureSchema::new(vec!["a".into(), "A".into()]).is_none());
    }
}
