use super::MetricsError;
use crate::model::{DispatchOffer, TimeRange};

/// Fraction of offers within `period` that were accepted.
pub fn acceptance_rate(offers: &[DispatchOffer], period: &TimeRange) -> Result<f64, MetricsError> {
    let (mut offered, mut accepted) = (0usize, 0usize);
    for o in offers.iter().filter(|o| period.contains(o.offered_ts)) {
        offered += 1;
        accepted += o.accepted as usize;
    }
    if offered == 0 {
        return Err(MetricsError::NoOffers);
    }
    Ok(accepted as f64 / offered as f64)
}
