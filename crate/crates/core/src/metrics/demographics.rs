use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::DriverProfile;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DemographicSummary {
    pub drivers: usize,
    pub gender_counts: BTreeMap<String, usize>,
    /// Over drivers with a recorded gender.
    pub gender: BTreeMap<String, f64>,
    pub gender_missing: usize,
    pub age_band_counts: BTreeMap<String, usize>,
    pub age_band: BTreeMap<String, f64>,
    pub age_band_missing: usize,
}

fn proportions(counts: &BTreeMap<String, usize>) -> BTreeMap<String, f64> {
    let n: usize = counts.values().sum();
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / n as f64)).collect()
}

/// Gender and age-band mix of a set of drivers.
pub fn cohort_summary(profiles: &[DriverProfile]) -> DemographicSummary {
    let mut s = DemographicSummary {
        drivers: profiles.len(),
        ..Default::default()
    };
    for p in profiles {
        match p.gender {
            Some(g) => *s.gender_counts.entry(g.label().to_string()).or_default() += 1,
            None => s.gender_missing += 1,
        }
        match p.age_band {
            Some(a) => *s.age_band_counts.entry(a.as_str().to_string()).or_default() += 1,
            None => s.age_band_missing += 1,
        }
    }
    s.gender = proportions(&s.gender_counts);
    s.age_band = proportions(&s.age_band_counts);
    s
}
