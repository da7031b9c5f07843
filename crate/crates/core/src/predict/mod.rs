//! How predictable is trip pay? Trips are encoded as fixed-width feature
//! vectors, least-squares models are fitted on one span of years and scored
//! by R² on another. A sharp drop in out-of-sample R² marks a change in the
//! pricing rule.

mod features;
mod ols;
mod year_matrix;

use thiserror::Error;

pub use features::{featurize, FeatureSchema, FeatureVector, DEFAULT_PRODUCTS};
pub use ols::{fit_ols, r2, r2_of_predictions, OlsModel};
pub use year_matrix::{year_matrix, MatrixMode, YearCell, YearDataset, YearMatrix, YearMatrixConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("trip is not a completed trip with accept, pickup and dropoff times")]
    IncompleteTrip,
    #[error("{rows} rows cannot determine {cols} coefficients")]
    Underdetermined { rows: usize, cols: usize },
    #[error("matrix and vector shapes disagree")]
    DimensionMismatch,
    #[error("test target has no variance")]
    ZeroVarianceTarget,
    #[error("normal equations are not positive definite")]
    Singular,
    #[error("need at least two years of trips, found {0}")]
    InsufficientYears(usize),
}
