use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::linkage::LinkedTrip;
use crate::model::DriverId;
use crate::numeric::{mean, median};

/// Half-open driver-share bins `[edges[i], edges[i+1])`, as fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareBins {
    edges: Vec<f64>,
}

impl Default for ShareBins {
    fn default() -> Self {
        ShareBins {
            edges: vec![0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.5],
        }
    }
}

impl ShareBins {
    /// `None` unless at least two strictly increasing finite edges are given.
    pub fn new(edges: Vec<f64>) -> Option<Self> {
        let ok = edges.len() >= 2 && edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[0] < w[1]);
        ok.then_some(ShareBins { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    /// Percent label such as `"70-80"`.
    pub fn label(&self, i: usize) -> String {
        let pct = |x: f64| {
            let p = (x * 100.0 * 1000.0).round() / 1000.0;
            if p.fract() == 0.0 {
                format!("{}", p as i64)
            } else {
                format!("{p}")
            }
        };
        let (lo, hi) = self.bounds(i);
        format!("{}-{}", pct(lo), pct(hi))
    }

    /// Bin index of a share; `Err(false)` below the first edge, `Err(true)`
    /// at or above the last.
    pub fn locate(&self, share: f64) -> Result<usize, bool> {
        if share < self.edges[0] {
            return Err(false);
        }
        if share >= *self.edges.last().expect("≥2 edges") {
            return Err(true);
        }
        Ok(self.edges.partition_point(|&e| e <= share) - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinCount {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareHistogram {
    pub bins: Vec<BinCount>,
    /// Shares below the first edge.
    pub below: usize,
    /// Shares at or above the last edge.
    pub above: usize,
}

impl ShareHistogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum::<usize>() + self.below + self.above
    }

    pub fn count(&self, label: &str) -> Option<usize> {
        self.bins.iter().find(|b| b.label == label).map(|b| b.count)
    }
}

/// Counts trips with a valid driver share per bin. Out-of-range shares are
/// kept in `below` / `above`, so the total always equals the number of
/// share-valid trips.
pub fn take_rate_histogram(linked: &[LinkedTrip], bins: &ShareBins) -> ShareHistogram {
    let mut counts = vec![0usize; bins.len()];
    let (mut below, mut above) = (0, 0);
    for share in linked.iter().filter_map(|l| l.driver_share) {
        match bins.locate(share) {
            Ok(i) => counts[i] += 1,
            Err(false) => below += 1,
            Err(true) => above += 1,
        }
    }
    ShareHistogram {
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| {
                let (lo, hi) = bins.bounds(i);
                BinCount {
                    label: bins.label(i),
                    lo,
                    hi,
                    count,
                }
            })
            .collect(),
        below,
        above,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    /// Pool all trips.
    Trip,
    /// Average within each driver first, then across drivers.
    Driver,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TakeRateStats {
    pub group_by: GroupBy,
    /// Number of units (trips or drivers) aggregated.
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Fraction of units whose (mean) share is at least the threshold.
    pub share_at_or_above: f64,
    pub threshold: f64,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite share"));
    v
}

/// Mean, median and at-or-above-threshold fraction of driver shares.
pub fn take_rate_stats(
    linked: &[LinkedTrip],
    group_by: GroupBy,
    threshold: f64,
) -> Result<TakeRateStats, MetricsError> {
    let units: Vec<f64> = match group_by {
        GroupBy::Trip => linked.iter().filter_map(|l| l.driver_share).collect(),
        GroupBy::Driver => {
            let mut per: BTreeMap<&DriverId, Vec<f64>> = BTreeMap::new();
            for l in linked {
                if let Some(s) = l.driver_share {
                    per.entry(&l.trip.driver_id).or_default().push(s);
                }
            }
            per.into_values()
                .map(|v| mean(&sorted(v)).expect("non-empty"))
                .collect()
        }
    };
    // summing in sorted order makes the result independent of input order
    let units = sorted(units);
    if units.is_empty() {
        return Err(MetricsError::NoValidTrips);
    }
    let at_or_above = units.iter().filter(|&&s| s >= threshold).count();
    Ok(TakeRateStats {
        group_by,
        n: units.len(),
        mean: mean(&units).expect("non-empty"),
        median: median(&units).expect("non-empty"),
        share_at_or_above: at_or_above as f64 / units.len() as f64,
        threshold,
    })
}

/// Driver and platform earnings per on-trip minute within one share bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerMinuteBin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub trips: usize,
    pub minutes: f64,
    /// Exact sums in minor units: `driver + platform = fare`.
    pub driver_minor: i64,
    pub platform_minor: i64,
    pub fare_minor: i64,
    /// Major units per minute.
    pub driver_per_min: f64,
    pub platform_per_min: f64,
    pub fare_per_min: f64,
}

/// Buckets share-valid trips by driver share and reports per-minute
/// earnings of driver and platform in each non-empty bin. Trips with no
/// on-trip time, or a share outside every bin, are left out.
pub fn per_minute_fare_by_split(linked: &[LinkedTrip], bins: &ShareBins) -> Vec<PerMinuteBin> {
    // per bin: trips, on-trip ms, driver minor, fare minor
    let mut acc = vec![(0usize, 0i64, 0i64, 0i64); bins.len()];
    for l in linked {
        let (Some(share), Some(fare), Some(ms)) = (l.driver_share, l.rider_fare, l.trip.on_trip_ms()) else {
            continue;
        };
        if ms <= 0 {
            continue;
        }
        if let Ok(i) = bins.locate(share) {
            let a = &mut acc[i];
            a.0 += 1;
            a.1 += ms;
            a.2 += l.driver_total.minor_units;
            a.3 += fare.minor_units;
        }
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(i, (trips, ms, driver, fare))| {
            let (lo, hi) = bins.bounds(i);
            let minutes = ms as f64 / 60_000.0;
            let platform = fare - driver;
            PerMinuteBin {
                label: bins.label(i),
                lo,
                hi,
                trips,
                minutes,
                driver_minor: driver,
                platform_minor: platform,
                fare_minor: fare,
                driver_per_min: driver as f64 / 100.0 / minutes,
                platform_per_min: platform as f64 / 100.0 / minutes,
                fare_per_min: fare as f64 / 100.0 / minutes,
            }
        })
        .collect()
}
