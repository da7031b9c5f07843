//! Scalar-generic numerics: descriptive statistics, kernel density
//! estimation, a dense row-major matrix and the linear solves the regression
//! code needs. Everything is written against [`Scalar`], implemented for
//! `f32` and `f64`.

mod kde;
mod matrix;
mod stats;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use kde::{gaussian_kde, silverman_bandwidth, trapezoid, KdeComparison};
pub use matrix::{cholesky_solve, Matrix};
pub use stats::{mean, median, population_std, quantile_sorted, sample_std};

/// Floating-point scalar used by the numeric routines.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
