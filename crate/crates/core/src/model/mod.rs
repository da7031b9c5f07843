//! Domain types shared across the toolkit: exact money, timestamps and the
//! calendar conventions used to derive local time fields, pricing eras, and
//! the normalised record types read from a driver's data export.

mod money;
mod records;
mod time;

use std::collections::BTreeMap;

use thiserror::Error;

pub use money::{Currency, Money};
pub use records::{
    ActivitySegment, AgeBand, AppSession, DispatchOffer, DriverId, DriverProfile, Gender, PaymentCategory,
    PaymentEvent, SegmentState, TripRecord, TripStatus,
};
pub use time::{era_of, Calendar, Era, EraBoundaries, IsoWeek, NaiveTimestamps, TimeRange, Timestamp, YearMonth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("currency mismatch: {left} vs {right}")]
    CurrencyMismatch { left: Currency, right: Currency },
    #[error("money overflow")]
    MoneyOverflow,
    #[error("invalid money amount {0:?}")]
    InvalidMoney(String),
    #[error("invalid currency code {0:?}")]
    InvalidCurrency(String),
    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("invalid month {0:?}")]
    InvalidMonth(String),
    #[error("invalid ISO week {0:?}")]
    InvalidWeek(String),
    #[error("invalid {kind} value {value:?}")]
    InvalidEnum { kind: &'static str, value: String },
    #[error("inverted timestamps")]
    InvertedTimestamps,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Year-on-year RPI percentage change by calendar month.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RpiSeries {
    yoy_pct: BTreeMap<YearMonth, f64>,
}

impl RpiSeries {
    /// Builds a series; months must be contiguous.
    pub fn new(yoy_pct: BTreeMap<YearMonth, f64>) -> Result<Self, ModelError> {
        let mut prev: Option<YearMonth> = None;
        for (&m, v) in &yoy_pct {
            if !v.is_finite() {
                return Err(ModelError::InvalidConfig(format!("non-finite RPI value at {m}")));
            }
            if let Some(p) = prev {
                if p.next() != m {
                    return Err(ModelError::InvalidConfig(format!(
                        "RPI series not contiguous between {p} and {m}"
                    )));
                }
            }
            prev = Some(m);
        }
        Ok(RpiSeries { yoy_pct })
    }

    pub fn get(&self, month: YearMonth) -> Option<f64> {
        self.yoy_pct.get(&month).copied()
    }

    pub fn months(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.yoy_pct.iter().map(|(&m, &v)| (m, v))
    }

    pub fn len(&self) -> usize {
        self.yoy_pct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yoy_pct.is_empty()
    }

    /// Reads a `month,yoy_pct` CSV.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ModelError::InvalidConfig(format!("RPI csv: {e}")))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| ModelError::InvalidConfig(format!("RPI csv lacks column {name}")))
        };
        let (mi, vi) = (col("month")?, col("yoy_pct")?);
        let mut map = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ModelError::InvalidConfig(format!("RPI csv: {e}")))?;
            let month: YearMonth = rec.get(mi).unwrap_or("").parse()?;
            let raw = rec.get(vi).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| ModelError::InvalidConfig(format!("RPI value {raw:?}")))?;
            map.insert(month, v);
        }
        RpiSeries::new(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rpi_csv_parses_and_requires_contiguity() {
        let ok = "month,yoy_pct\n2023-01,13.4\n2023-02,13.8\n";
        let s = RpiSeries::from_csv_reader(ok.as_bytes()).unwrap();
        assert_eq!(s.get(YearMonth::new(2023, 2)), Some(13.8));
        let gap = "month,yoy_pct\n2023-01,13.4\n2023-03,13.8\n";
        assert!(RpiSeries::from_csv_reader(gap.as_bytes()).is_err());
    }
}
