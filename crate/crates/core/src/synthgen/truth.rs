use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GenConfig, ShareModel};
use crate::ingest::TableKind;
use crate::metrics::{CohortGroup, ShareBins};
use crate::model::{DriverId, IsoWeek, YearMonth};

/// A trip's dropoff and the time its earnings were posted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pairing {
    pub dropoff_ms: i64,
    pub payment_ms: i64,
    pub fare_minor: i64,
    pub pay_minor: i64,
}

/// Scheduled time per state and the signed ledger total for one ISO week.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekTruth {
    pub standby_ms: i64,
    pub en_route_ms: i64,
    pub on_trip_ms: i64,
    pub ledger_minor: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverTruth {
    pub driver_id: DriverId,
    /// Configured probability of accepting an offer.
    pub acceptance_rate: f64,
    pub offers: usize,
    pub accepted_offers: usize,
    pub completed_trips: usize,
    pub cancelled_trips: usize,
    pub cohort_group: Option<CohortGroup>,
    /// A month in which the driver did no work at all.
    pub idle_month: Option<YearMonth>,
    pub gender: String,
    pub age_band: String,
    pub pairings: Vec<Pairing>,
    pub weeks: BTreeMap<IsoWeek, WeekTruth>,
    /// Rows written per table, corrupt rows included.
    pub rows: BTreeMap<TableKind, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareBinTruth {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    /// Fraction of dynamic-era trips whose realised share falls in the bin.
    pub realized: f64,
    /// Model probability of the bin, averaged over those trips' fares.
    pub expected: f64,
}

/// Driver share statistics of completed dynamic-era trips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareTruth {
    pub trips: usize,
    pub realized_mean: f64,
    pub realized_median: f64,
    pub expected_mean: f64,
    pub expected_median: f64,
    pub bins: Vec<ShareBinTruth>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub driver_id: DriverId,
    pub table: TableKind,
    pub kind: String,
    /// 1-based line in the written file (header is line 1).
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: GenConfig,
    /// Fixed-era fares are multiples of this many minor units.
    pub fare_quantum: i64,
    /// Every personal field written contains this marker.
    pub pii_marker: Option<String>,
    pub drivers: Vec<DriverTruth>,
    pub dynamic_share: Option<ShareTruth>,
    pub corruptions: Vec<CorruptionRecord>,
}

impl GroundTruth {
    pub fn driver(&self, id: &DriverId) -> Option<&DriverTruth> {
        self.drivers.iter().find(|d| &d.driver_id == id)
    }
}

fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl ShareModel {
    /// `P(share < x)` for a trip whose unclamped mean share is `mu`.
    pub fn prob_below(&self, mu: f64, x: f64) -> f64 {
        if x <= self.min {
            0.0
        } else if x > self.max {
            1.0
        } else {
            phi((x - mu) / self.noise_sd)
        }
    }

    /// Mean of the clamped share for unclamped mean `mu`.
    pub fn expected_share(&self, mu: f64) -> f64 {
        let (a, b, s) = (self.min, self.max, self.noise_sd);
        let (za, zb) = ((a - mu) / s, (b - mu) / s);
        a * phi(za) + b * (1.0 - phi(zb)) + mu * (phi(zb) - phi(za)) + s * (pdf(za) - pdf(zb))
    }
}

/// `mus` are the unclamped mean shares of the trips, `realized` their
/// shares as written (after rounding to minor units).
pub(super) fn share_truth(model: &ShareModel, mus: &[f64], realized: &[f64]) -> Option<ShareTruth> {
    if mus.is_empty() {
        return None;
    }
    let n = mus.len() as f64;
    let mut sorted = realized.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite share"));
    let realized_mean = sorted.iter().sum::<f64>() / n;
    let realized_median = crate::numeric::median(&sorted).expect("non-empty");
    let mut ex: Vec<f64> = mus.iter().map(|&m| model.expected_share(m)).collect();
    ex.sort_by(|a, b| a.partial_cmp(b).expect("finite share"));
    let expected_mean = ex.iter().sum::<f64>() / n;

    let cdf = |x: f64| mus.iter().map(|&m| model.prob_below(m, x)).sum::<f64>() / n;
    let (mut lo, mut hi) = (model.min, model.max);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bins = ShareBins::default();
    let mut counts = vec![0usize; bins.len()];
    for &s in realized {
        if let Ok(i) = bins.locate(s) {
            counts[i] += 1;
        }
    }
    Some(ShareTruth {
        trips: mus.len(),
        realized_mean,
        realized_median,
        expected_mean,
        expected_median: 0.5 * (lo + hi),
        bins: (0..bins.len())
            .map(|i| {
                let (l, h) = bins.bounds(i);
                ShareBinTruth {
                    label: bins.label(i),
                    lo: l,
                    hi: h,
                    realized: counts[i] as f64 / n,
                    expected: cdf(h) - cdf(l),
                }
            })
            .collect(),
    })
}
