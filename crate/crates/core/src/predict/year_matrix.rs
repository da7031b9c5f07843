use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{featurize, fit_ols, r2, FeatureSchema, PredictError};
use crate::linkage::LinkedTrip;
use crate::model::Calendar;
use crate::numeric::{Matrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixMode {
    /// Train on year `Y − n` alone.
    SingleYear,
    /// Train on every year up to and including `Y − n`.
    Cumulative,
}

impl std::str::FromStr for MatrixMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "single_year" | "single" => Ok(MatrixMode::SingleYear),
            "cumulative" => Ok(MatrixMode::Cumulative),
            other => Err(format!("unknown mode {other:?}, expected single_year or cumulative")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearMatrixConfig {
    pub mode: MatrixMode,
    /// Seeds the within-year split used by the lag-0 cells.
    pub seed: u64,
    /// Held-out fraction of the test year for lag-0 cells.
    pub test_fraction: f64,
}

impl Default for YearMatrixConfig {
    fn default() -> Self {
        YearMatrixConfig {
            mode: MatrixMode::SingleYear,
            seed: 0,
            test_fraction: 0.2,
        }
    }
}

/// Featurised trips grouped by the calendar year of pickup.
#[derive(Clone, Debug)]
pub struct YearDataset<T> {
    pub feature_names: Vec<String>,
    pub years: BTreeMap<i32, (Matrix<T>, Vec<T>)>,
}

impl<T: Scalar> YearDataset<T> {
    /// Completed trips that were linked to at least one earnings payment.
    pub fn from_linked(linked: &[LinkedTrip], schema: &FeatureSchema, calendar: &Calendar) -> Self {
        let mut rows: BTreeMap<i32, (Vec<T>, Vec<T>)> = BTreeMap::new();
        for l in linked.iter().filter(|l| !l.earnings.is_empty()) {
            let Ok(f) = featurize::<T>(l, schema, calendar) else {
                continue;
            };
            let year = calendar.year(l.trip.pickup_ts.expect("featurized trips have a pickup"));
            let (x, y) = rows.entry(year).or_default();
            x.extend(f.values);
            y.push(f.target);
        }
        let d = schema.len();
        YearDataset {
            feature_names: schema.names().to_vec(),
            years: rows
                .into_iter()
                .map(|(yr, (x, y))| (yr, (Matrix::from_vec(y.len(), d, x).expect("rows of equal width"), y)))
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.years.values().map(|(_, y)| y.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearCell {
    pub test_year: i32,
    pub lag: i32,
    pub train_years: Vec<i32>,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Empty when there is no training data, too few training rows, or a
    /// test target without variance.
    pub r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearMatrix {
    pub mode: MatrixMode,
    pub years: Vec<i32>,
    pub cells: Vec<YearCell>,
}

impl YearMatrix {
    pub fn cell(&self, test_year: i32, lag: i32) -> Option<&YearCell> {
        self.cells.iter().find(|c| c.test_year == test_year && c.lag == lag)
    }

    pub fn max_lag(&self) -> i32 {
        self.cells.iter().map(|c| c.lag).max().unwrap_or(0)
    }

    /// One row per test year, one column per lag (`Y`, `Y-1`, ...).
    pub fn to_csv(&self) -> String {
        let lags = self.max_lag();
        let mut out = String::from("test_year");
        for n in 0..=lags {
            out.push_str(if n == 0 { ",Y" } else { "," });
            if n > 0 {
                let _ = write!(out, "Y-{n}");
            }
        }
        out.push('\n');
        for &y in &self.years {
            let _ = write!(out, "{y}");
            for n in 0..=lags {
                out.push(',');
                if let Some(v) = self.cell(y, n).and_then(|c| c.r2) {
                    let _ = write!(out, "{v:.3}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Seeded partition of `0..n` into (train, test) index lists.
fn split_indices(n: usize, test_fraction: f64, seed: u64, stream: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let mut test = idx.split_off(n - n_test.min(n));
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}

struct CellPlan {
    test_year: i32,
    lag: i32,
    train_years: Vec<i32>,
}

/// R² of pay models trained on earlier years and tested on later ones, for
/// every test year and lag. Lag-0 cells train and test on a seeded split of
/// the same year. Cells are computed in parallel; each is self-contained, so
/// the result does not depend on scheduling.
pub fn year_matrix<T: Scalar>(data: &YearDataset<T>, config: &YearMatrixConfig) -> Result<YearMatrix, PredictError> {
    let years: Vec<i32> = data.years.keys().copied().collect();
    if years.len() < 2 {
        return Err(PredictError::InsufficientYears(years.len()));
    }
    let first = years[0];
    let mut plans = Vec::new();
    for &y in &years {
        for lag in 0..=(y - first) {
            let train_years: Vec<i32> = match config.mode {
                MatrixMode::SingleYear => vec![y - lag],
                MatrixMode::Cumulative => years.iter().copied().filter(|&t| t <= y - lag).collect(),
            };
            plans.push(CellPlan {
                test_year: y,
                lag,
                train_years: train_years.into_iter().filter(|t| data.years.contains_key(t)).collect(),
            });
        }
    }
    let cells = plans.par_iter().map(|p| run_cell(data, config, p)).collect();
    Ok(YearMatrix {
        mode: config.mode,
        years,
        cells,
    })
}

fn run_cell<T: Scalar>(data: &YearDataset<T>, config: &YearMatrixConfig, plan: &CellPlan) -> YearCell {
    let (tx, ty) = &data.years[&plan.test_year];
    let d = data.feature_names.len();
    let mut train_x = Matrix::from_vec(0, d, Vec::new()).expect("empty matrix");
    let mut train_y: Vec<T> = Vec::new();
    let (test_x, test_y) = if plan.lag == 0 {
        let (tr, te) = split_indices(ty.len(), config.test_fraction, config.seed, plan.test_year as u64);
        for &yr in plan.train_years.iter().filter(|&&yr| yr != plan.test_year) {
            let (x, y) = &data.years[&yr];
            train_x = train_x.vstack(x).expect("same width");
            train_y.extend_from_slice(y);
        }
        train_x = train_x.vstack(&tx.select_rows(&tr)).expect("same width");
        train_y.extend(tr.iter().map(|&i| ty[i]));
        (tx.select_rows(&te), te.iter().map(|&i| ty[i]).collect::<Vec<_>>())
    } else {
        for yr in &plan.train_years {
            let (x, y) = &data.years[yr];
            train_x = train_x.vstack(x).expect("same width");
            train_y.extend_from_slice(y);
        }
        (tx.clone(), ty.clone())
    };
    let r2 = if train_y.is_empty() {
        None
    } else {
        match fit_ols(&train_x, &train_y, &data.feature_names) {
            Ok(m) => r2(&m, &test_x, &test_y).ok().map(T::to_f64_lossy),
            Err(e) => {
                log::warn!("year {} lag {}: {e}", plan.test_year, plan.lag);
                None
            }
        }
    };
    YearCell {
        test_year: plan.test_year,
        lag: plan.lag,
        train_years: plan.train_years.clone(),
        train_rows: train_y.len(),
        test_rows: test_y.len(),
        r2,
    }
}
