use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::metrics::MonthRange;
use crate::model::{EraBoundaries, YearMonth};

/// Additive fare rule in pounds. Clock terms use the local pickup hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FareRule {
    pub base: f64,
    pub per_mile: f64,
    pub per_minute: f64,
    pub per_en_route_minute: f64,
    pub airport_origin: f64,
    pub airport_dest: f64,
    /// Added for pickups in 07–09 and 17–19.
    pub peak: f64,
    /// Added for pickups from 22:00 to 05:59.
    pub night: f64,
    pub weekend: f64,
    pub product: BTreeMap<String, f64>,
    /// Standard deviation of Gaussian noise on the fare.
    pub noise_sd: f64,
    pub minimum: f64,
}

impl Default for FareRule {
    fn default() -> Self {
        FareRule {
            base: 2.5,
            per_mile: 1.25,
            per_minute: 0.2,
            per_en_route_minute: 0.0,
            airport_origin: 5.0,
            airport_dest: 3.0,
            peak: 1.5,
            night: 1.0,
            weekend: 0.0,
            product: BTreeMap::from([("comfort".into(), 1.0), ("xl".into(), 2.5), ("exec".into(), 5.0)]),
            noise_sd: 0.25,
            minimum: 3.0,
        }
    }
}

/// A fare rule in force from `from` until the next epoch starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FareEpoch {
    pub from: NaiveDate,
    #[serde(default)]
    pub rule: FareRule,
}

/// Driver share under dynamic pricing:
/// `clamp(intercept − slope · (fare − reference_fare) + N(0, noise_sd), min, max)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShareModel {
    pub intercept: f64,
    /// Share lost per pound of fare.
    pub slope: f64,
    pub reference_fare: f64,
    pub noise_sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ShareModel {
    fn default() -> Self {
        ShareModel {
            intercept: 0.74,
            slope: 0.012,
            reference_fare: 12.0,
            noise_sd: 0.08,
            min: 0.5,
            max: 1.09,
        }
    }
}

impl ShareModel {
    pub fn mean_at(&self, fare: f64) -> f64 {
        self.intercept - self.slope * (fare - self.reference_fare)
    }
}

/// Assigns drivers to a post-window pay cut or rise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub pre: MonthRange,
    pub post: MonthRange,
    /// Fraction of drivers (rounded to the nearest whole driver) whose pay
    /// is cut in the post window.
    #[serde(default = "CohortConfig::default_fraction")]
    pub paid_less_fraction: f64,
    /// Relative cut applied to fares and pay in the post window.
    #[serde(default = "CohortConfig::default_cut")]
    pub cut: f64,
    /// Relative rise for everyone else.
    #[serde(default = "CohortConfig::default_raise")]
    pub raise: f64,
    /// Number of drivers given one idle month inside the pre window.
    #[serde(default)]
    pub drivers_missing_a_month: usize,
}

impl CohortConfig {
    fn default_fraction() -> f64 {
        0.8
    }
    fn default_cut() -> f64 {
        0.25
    }
    fn default_raise() -> f64 {
        0.35
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Corruptions {
    /// Exact copies of existing trip rows.
    pub duplicate_trips: usize,
    /// Extra trip rows whose dropoff precedes pickup.
    pub inverted_trips: usize,
    /// Extra payment rows with an unparseable amount.
    pub malformed_money: usize,
}

impl Corruptions {
    pub fn total(&self) -> usize {
        self.duplicate_trips + self.inverted_trips + self.malformed_money
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_drivers: usize,
    /// First day generated.
    pub start: NaiveDate,
    /// Day after the last day generated.
    pub end: NaiveDate,
    pub eras: EraBoundaries,
    /// Platform commission in the fixed-commission era.
    pub commission: f64,
    pub fare_epochs: Vec<FareEpoch>,
    pub share: ShareModel,
    /// Probability that a driver works on a given day.
    pub work_day_probability: f64,
    pub shift_hours_min: f64,
    pub shift_hours_max: f64,
    /// Mean gap between dispatch offers, in minutes.
    pub standby_mean_minutes: f64,
    /// Multiplier on standby gaps once dynamic pricing starts.
    pub standby_inflation: f64,
    /// Per-driver acceptance rate is drawn uniformly from this range.
    pub acceptance_min: f64,
    pub acceptance_max: f64,
    pub rider_cancel_rate: f64,
    pub airport_origin_rate: f64,
    pub airport_dest_rate: f64,
    /// Product names and their relative frequency.
    pub products: BTreeMap<String, f64>,
    pub tip_rate: f64,
    /// Fraction of trips paid as two earnings line items.
    pub split_earnings_rate: f64,
    /// Standard deviation in seconds of the (absolute) delay from dropoff to
    /// the earnings payment.
    pub payment_jitter_seconds: f64,
    pub cohort: Option<CohortConfig>,
    pub corruptions: Corruptions,
    /// Fill personal fields with recognisable marker strings.
    pub pii_markers: bool,
    /// Gender label (`M`, `F`, `other`) to weight; assigned by exact quota.
    pub gender_mix: BTreeMap<String, f64>,
    pub age_mix: BTreeMap<String, f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_drivers: 10,
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            eras: EraBoundaries::default(),
            commission: 0.25,
            fare_epochs: vec![FareEpoch {
                from: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
                rule: FareRule::default(),
            }],
            share: ShareModel::default(),
            work_day_probability: 5.0 / 7.0,
            shift_hours_min: 4.0,
            shift_hours_max: 9.0,
            standby_mean_minutes: 10.0,
            standby_inflation: 1.4,
            acceptance_min: 0.55,
            acceptance_max: 0.95,
            rider_cancel_rate: 0.05,
            airport_origin_rate: 0.05,
            airport_dest_rate: 0.05,
            products: BTreeMap::from([
                ("uberx".into(), 0.7),
                ("comfort".into(), 0.15),
                ("xl".into(), 0.1),
                ("exec".into(), 0.05),
            ]),
            tip_rate: 0.1,
            split_earnings_rate: 0.2,
            payment_jitter_seconds: 60.0,
            cohort: None,
            corruptions: Corruptions::default(),
            pii_markers: true,
            gender_mix: BTreeMap::from([("M".into(), 0.96), ("F".into(), 0.04)]),
            age_mix: BTreeMap::from([
                ("20-29".into(), 0.15),
                ("30-39".into(), 0.35),
                ("40-49".into(), 0.3),
                ("50+".into(), 0.2),
            ]),
        }
    }
}

fn check(ok: bool, what: &str) -> Result<(), SynthError> {
    if ok {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(what.to_string()))
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl GenConfig {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let cfg: GenConfig = serde_json::from_str(text).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, SynthError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SynthError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        check(self.n_drivers >= 1, "n_drivers must be at least 1")?;
        check(self.start < self.end, "start must precede end")?;
        check(
            self.eras.opaque_from < self.eras.dynamic_from,
            "era boundaries must be increasing",
        )?;
        check((0.0..1.0).contains(&self.commission), "commission must lie in [0, 1)")?;
        check(!self.fare_epochs.is_empty(), "at least one fare epoch is required")?;
        check(
            self.fare_epochs.windows(2).all(|w| w[0].from < w[1].from),
            "fare epochs must be in increasing date order",
        )?;
        check(
            self.fare_epochs[0].from <= self.start,
            "the first fare epoch must start on or before the start date",
        )?;
        check(
            self.fare_epochs
                .iter()
                .all(|e| e.rule.noise_sd >= 0.0 && e.rule.minimum > 0.0),
            "fare noise must be non-negative and the minimum fare positive",
        )?;
        let s = &self.share;
        check(
            s.noise_sd > 0.0 && s.min < s.max && s.min > 0.0,
            "share model needs noise_sd > 0 and 0 < min < max",
        )?;
        for (v, name) in [
            (self.work_day_probability, "work_day_probability"),
            (self.acceptance_min, "acceptance_min"),
            (self.acceptance_max, "acceptance_max"),
            (self.rider_cancel_rate, "rider_cancel_rate"),
            (self.airport_origin_rate, "airport_origin_rate"),
            (self.airport_dest_rate, "airport_dest_rate"),
            (self.tip_rate, "tip_rate"),
            (self.split_earnings_rate, "split_earnings_rate"),
        ] {
            check(unit(v), &format!("{name} must lie in [0, 1]"))?;
        }
        check(
            self.acceptance_min <= self.acceptance_max,
            "acceptance_min must not exceed acceptance_max",
        )?;
        check(self.acceptance_max > 0.0, "acceptance_max must be positive")?;
        check(
            self.airport_origin_rate + self.airport_dest_rate <= 1.0,
            "airport rates must sum to at most 1",
        )?;
        check(
            self.payment_jitter_seconds >= 0.0,
            "payment_jitter_seconds must be non-negative",
        )?;
        check(
            self.shift_hours_min > 0.0 && self.shift_hours_min <= self.shift_hours_max && self.shift_hours_max <= 16.0,
            "shift hours must satisfy 0 < min <= max <= 16",
        )?;
        check(
            self.standby_mean_minutes > 0.0 && self.standby_inflation > 0.0,
            "standby mean and inflation must be positive",
        )?;
        for (mix, name) in [
            (&self.products, "products"),
            (&self.gender_mix, "gender_mix"),
            (&self.age_mix, "age_mix"),
        ] {
            check(
                !mix.is_empty() && mix.values().all(|&w| w >= 0.0) && mix.values().sum::<f64>() > 0.0,
                &format!("{name} needs non-negative weights with a positive total"),
            )?;
        }
        for g in self.gender_mix.keys() {
            check(
                g.parse::<crate::model::Gender>().is_ok(),
                &format!("unknown gender label {g:?}"),
            )?;
        }
        for a in self.age_mix.keys() {
            check(
                a.parse::<crate::model::AgeBand>().is_ok(),
                &format!("unknown age band {a:?}"),
            )?;
        }
        if let Some(c) = &self.cohort {
            check(
                unit(c.paid_less_fraction),
                "cohort.paid_less_fraction must lie in [0, 1]",
            )?;
            check(
                (0.0..1.0).contains(&c.cut) && c.raise >= 0.0,
                "cohort.cut must lie in [0, 1) and raise be non-negative",
            )?;
            check(
                c.pre.last < c.post.first,
                "cohort.pre must end before cohort.post starts",
            )?;
            check(c.pre.len() == c.post.len(), "cohort windows must have the same length")?;
            check(
                c.drivers_missing_a_month <= self.n_drivers,
                "cohort.drivers_missing_a_month exceeds n_drivers",
            )?;
        }
        Ok(())
    }

    /// Fare rule in force on `date`.
    pub fn fare_rule(&self, date: NaiveDate) -> &FareRule {
        let i = self.fare_epochs.partition_point(|e| e.from <= date);
        &self.fare_epochs[i.saturating_sub(1)].rule
    }

    /// Smallest fare quantum (in minor units) whose driver portion under the
    /// fixed commission is a whole number of minor units.
    pub fn fare_quantum(&self) -> i64 {
        let keep = 1.0 - self.commission;
        (1..=10_000)
            .find(|&q| {
                let v = q as f64 * keep;
                (v - v.round()).abs() < 1e-9
            })
            .unwrap_or(1)
    }

    pub fn months(&self) -> (YearMonth, YearMonth) {
        let last = self.end.pred_opt().expect("end after start");
        (
            YearMonth::new(
                chrono::Datelike::year(&self.start),
                chrono::Datelike::month(&self.start),
            ),
            YearMonth::new(chrono::Datelike::year(&last), chrono::Datelike::month(&last)),
        )
    }
}
