use std::collections::BTreeMap;

use super::MetricsError;
use crate::model::{RpiSeries, YearMonth};
use crate::numeric::Scalar;

/// Rescales monthly values into `base` month pounds.
///
/// Each month's year-on-year RPI change gives a monthly price factor
/// `(1 + yoy/100)^(1/12)`. A value from month `m < base` is multiplied by the
/// product of the factors of months `m+1 ..= base`; a value from `m > base`
/// is divided by the product over `base+1 ..= m`.
pub fn adjust_inflation<T: Scalar>(
    series: &BTreeMap<YearMonth, T>,
    rpi: &RpiSeries,
    base: YearMonth,
) -> Result<BTreeMap<YearMonth, T>, MetricsError> {
    let factor = |m: YearMonth| -> Result<T, MetricsError> {
        let yoy = rpi.get(m).ok_or(MetricsError::MissingRpiMonth(m))?;
        Ok(T::of((1.0 + yoy / 100.0).powf(1.0 / 12.0)))
    };
    series
        .iter()
        .map(|(&m, &v)| {
            let mut scale = T::one();
            if m < base {
                for k in m.next().through(base) {
                    scale = scale * factor(k)?;
                }
            } else if m > base {
                for k in base.next().through(m) {
                    scale = scale / factor(k)?;
                }
            }
            Ok((m, v * scale))
        })
        .collect()
}
