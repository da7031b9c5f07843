//! The audit metric suite: weekly pay and pay per hour under both
//! working-time definitions, inflation adjustment, take-rate distributions,
//! surplus per on-trip hour, per-minute fares by split, cohort pay change,
//! acceptance rates, density comparisons and demographics.
//!
//! Per-hour aggregates are pooled ratios (`Σ pay / Σ hours`), never means of
//! per-week ratios.

mod cohort;
mod demographics;
mod dispatch;
mod inflation;
mod pay;
mod surplus;
mod take_rate;

use thiserror::Error;

pub use cohort::{cohort_pay_change, CohortDriver, CohortGroup, CohortSplit, MonthRange};
pub use demographics::{cohort_summary, DemographicSummary};
pub use dispatch::acceptance_rate;
pub use inflation::adjust_inflation;
pub use pay::{monthly_pay_per_hour, pay_per_hour, weekly_pay, weekly_rows, WeekRange, WeeklyPayRow};
pub use surplus::{
    interpolate_gaps, surplus_for_month, surplus_series, DriverActivity, PointStatus, SeriesPoint, SurplusMonth,
};
pub use take_rate::{
    per_minute_fare_by_split, take_rate_histogram, take_rate_stats, GroupBy, PerMinuteBin, ShareBins, ShareHistogram,
    TakeRateStats,
};

use crate::model::{ModelError, YearMonth};
use crate::numeric::{KdeComparison, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no working hours in the period")]
    ZeroHours,
    #[error("RPI series has no value for {0}")]
    MissingRpiMonth(YearMonth),
    #[error("no dispatch offers in the period")]
    NoOffers,
    #[error("no trips with a valid driver share")]
    NoValidTrips,
    #[error("empty sample")]
    EmptySample,
    #[error("invalid cohort windows: {0}")]
    InvalidWindows(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Kernel density estimates of two samples on a shared grid
/// (Silverman bandwidth per sample).
pub fn distribution_compare<T: Scalar>(a: &[T], b: &[T]) -> Result<KdeComparison<T>, MetricsError> {
    KdeComparison::compare(a, b, KdeComparison::<T>::DEFAULT_GRID).ok_or(MetricsError::EmptySample)
}
