use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelError, Money, Timestamp};

/// Driver identifier: the platform id before anonymisation, a pseudonym after.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriverId(pub String);

impl DriverId {
    pub fn new(s: impl Into<String>) -> Self {
        DriverId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DriverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ModelError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key = s.trim().to_ascii_lowercase();
                match key.as_str() {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    _ => Err(ModelError::InvalidEnum { kind: stringify!($name), value: s.to_string() }),
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripStatus {
    Completed,
    RiderCancelled,
    DriverCancelled,
}

string_enum!(TripStatus {
    Completed => "completed",
    RiderCancelled => "rider_cancelled",
    DriverCancelled => "driver_cancelled",
});

impl TripStatus {
    pub fn is_cancelled(&self) -> bool {
        !matches!(self, TripStatus::Completed)
    }
}

/// One trip row from the driver's lifetime trip table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub driver_id: DriverId,
    pub request_ts: Timestamp,
    pub accept_ts: Option<Timestamp>,
    pub pickup_ts: Option<Timestamp>,
    pub dropoff_ts: Option<Timestamp>,
    /// When a cancelled trip was called off.
    pub cancel_ts: Option<Timestamp>,
    pub distance_miles: f64,
    pub status: TripStatus,
    pub original_fare: Option<Money>,
    pub origin_tag: String,
    pub dest_tag: String,
    pub product: String,
    pub pickup_address: Option<String>,
    pub dropoff_address: Option<String>,
    pub vehicle_plate: Option<String>,
}

impl TripRecord {
    /// Checks ordering and completeness of the timestamps.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.distance_miles.is_finite() && self.distance_miles >= 0.0) {
            return Err(ModelError::InvalidRecord("negative or non-finite distance".into()));
        }
        let chain = [Some(self.request_ts), self.accept_ts, self.pickup_ts, self.dropoff_ts];
        let mut last: Option<Timestamp> = None;
        for t in chain.into_iter().flatten() {
            if let Some(prev) = last {
                if t < prev {
                    return Err(ModelError::InvertedTimestamps);
                }
            }
            last = Some(t);
        }
        if let (Some(c), Some(a)) = (self.cancel_ts, self.accept_ts) {
            if c < a {
                return Err(ModelError::InvertedTimestamps);
            }
        }
        if self.status == TripStatus::Completed
            && (self.accept_ts.is_none() || self.pickup_ts.is_none() || self.dropoff_ts.is_none())
        {
            return Err(ModelError::InvalidRecord("completed trip missing a timestamp".into()));
        }
        Ok(())
    }

    pub fn is_completed(&self) -> bool {
        self.status == TripStatus::Completed
    }

    /// On-trip duration (pickup to dropoff) in milliseconds.
    pub fn on_trip_ms(&self) -> Option<i64> {
        Some(self.dropoff_ts?.0 - self.pickup_ts?.0)
    }

    /// En-route duration (accept to pickup) in milliseconds.
    pub fn en_route_ms(&self) -> Option<i64> {
        Some(self.pickup_ts?.0 - self.accept_ts?.0)
    }

    pub fn is_airport_origin(&self) -> bool {
        self.origin_tag.eq_ignore_ascii_case("airport")
    }

    pub fn is_airport_dest(&self) -> bool {
        self.dest_tag.eq_ignore_ascii_case("airport")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentCategory {
    TripEarnings,
    Tip,
    CommissionCharge,
    Promotion,
    ThirdPartyFee,
    Adjustment,
    Other,
}

string_enum!(PaymentCategory {
    TripEarnings => "trip_earnings" | "trip" | "fare",
    Tip => "tip",
    CommissionCharge => "commission_charge" | "commission" | "service_fee",
    Promotion => "promotion" | "incentive" | "quest",
    ThirdPartyFee => "third_party_fee" | "fee_reimbursement" | "toll" | "congestion_charge",
    Adjustment => "adjustment",
    Other => "other",
});

impl PaymentCategory {
    /// Maps a source label to a category; anything unrecognised is `Other`.
    pub fn classify(label: &str) -> PaymentCategory {
        label.parse().unwrap_or(PaymentCategory::Other)
    }
}

/// One signed money movement on the driver's ledger.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentEvent {
    pub driver_id: DriverId,
    pub ts: Timestamp,
    pub category: PaymentCategory,
    pub amount: Money,
    pub memo: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchOffer {
    pub driver_id: DriverId,
    pub offered_ts: Timestamp,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentState {
    Standby,
    EnRoute,
    OnTrip,
}

impl SegmentState {
    pub const ALL: [SegmentState; 3] = [SegmentState::Standby, SegmentState::EnRoute, SegmentState::OnTrip];

    pub fn index(&self) -> usize {
        match self {
            SegmentState::Standby => 0,
            SegmentState::EnRoute => 1,
            SegmentState::OnTrip => 2,
        }
    }
}

string_enum!(SegmentState {
    Standby => "standby",
    EnRoute => "en_route",
    OnTrip => "on_trip",
});

/// Half-open `[start_ts, end_ts)` interval spent in one state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySegment {
    pub driver_id: DriverId,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    pub state: SegmentState,
}

impl ActivitySegment {
    pub fn duration_ms(&self) -> i64 {
        self.end_ts.0 - self.start_ts.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "other")]
    Other,
}

string_enum!(Gender {
    Male => "m" | "male" | "man",
    Female => "f" | "female" | "woman",
    Other => "other",
});

impl Gender {
    pub fn label(&self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
            Gender::Other => "other",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "20-29")]
    Twenties,
    #[serde(rename = "30-39")]
    Thirties,
    #[serde(rename = "40-49")]
    Forties,
    #[serde(rename = "50+")]
    FiftyPlus,
}

string_enum!(AgeBand {
    Twenties => "20-29",
    Thirties => "30-39",
    Forties => "40-49",
    FiftyPlus => "50+",
});

impl AgeBand {
    pub const ALL: [AgeBand; 4] = [
        AgeBand::Twenties,
        AgeBand::Thirties,
        AgeBand::Forties,
        AgeBand::FiftyPlus,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub driver_id: DriverId,
    pub gender: Option<Gender>,
    pub age_band: Option<AgeBand>,
    pub first_trip_ts: Timestamp,
    pub name: Option<String>,
    pub email: Option<String>,
}

/// One logged-in span on the app.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSession {
    pub driver_id: DriverId,
    pub login_ts: Timestamp,
    pub logout_ts: Timestamp,
}

impl AppSession {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.login_ts >= self.logout_ts {
            return Err(ModelError::InvertedTimestamps);
        }
        Ok(())
    }
}
