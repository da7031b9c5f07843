use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::numeric::{cholesky_solve, Matrix, Scalar};

/// Ordinary least squares fit on standardised features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsModel<T> {
    pub feature_names: Vec<String>,
    /// Coefficients in the original feature units; zero for dropped columns.
    pub coefficients: Vec<T>,
    pub intercept: T,
    /// Training mean and population standard deviation of every feature.
    pub means: Vec<T>,
    pub stds: Vec<T>,
    /// Zero-variance features left out of the fit.
    pub dropped: Vec<String>,
    /// Mean of the training target.
    pub target_mean: T,
    /// `(column, coefficient)` on the standardised scale.
    standardized: Vec<(usize, T)>,
}

impl<T: Scalar> OlsModel<T> {
    pub fn predict(&self, row: &[T]) -> T {
        self.standardized.iter().fold(self.target_mean, |acc, &(c, b)| {
            acc + b * (row[c] - self.means[c]) / self.stds[c]
        })
    }

    pub fn predict_all(&self, x: &Matrix<T>) -> Vec<T> {
        x.row_iter().map(|r| self.predict(r)).collect()
    }
}

/// Ridge factor relative to the mean diagonal of the Gram matrix. Single
/// precision needs a larger floor for the factorisation to stay positive
/// definite on rank-deficient one-hot blocks.
fn ridge_factor<T: Scalar>() -> T {
    T::of(1e-8).max(T::epsilon() * T::of(32.0))
}

/// Fits `y ≈ β₀ + Xβ`.
///
/// Columns are centred and scaled by their training statistics; columns
/// with no variance are dropped (and logged). The standardised coefficients
/// solve `(ZᵀZ + εI)β = Zᵀ(y − ȳ)` with `ε = 1e-8 · trace(ZᵀZ) / d`, which
/// keeps the system solvable when one-hot blocks are collinear with the
/// intercept.
pub fn fit_ols<T: Scalar>(x: &Matrix<T>, y: &[T], feature_names: &[String]) -> Result<OlsModel<T>, PredictError> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n || feature_names.len() != d {
        return Err(PredictError::DimensionMismatch);
    }
    if n <= d {
        return Err(PredictError::Underdetermined { rows: n, cols: d });
    }
    let nf = T::of_usize(n);
    let mut means = vec![T::zero(); d];
    for r in x.row_iter() {
        for (m, &v) in means.iter_mut().zip(r) {
            *m = *m + v;
        }
    }
    means.iter_mut().for_each(|m| *m = *m / nf);
    let mut stds = vec![T::zero(); d];
    for r in x.row_iter() {
        for ((s, &m), &v) in stds.iter_mut().zip(&means).zip(r) {
            *s = *s + (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / nf).sqrt());

    let tol = T::epsilon() * T::of(64.0);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..d {
        if stds[c] > tol * means[c].abs().max(T::one()) {
            kept.push(c);
        } else {
            log::debug!("dropping zero-variance feature {}", feature_names[c]);
            dropped.push(feature_names[c].clone());
            stds[c] = T::zero();
        }
    }

    let y_mean = y.iter().copied().sum::<T>() / nf;
    let k = kept.len();
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k];
    let mut z = vec![T::zero(); k];
    for (r, &yv) in x.row_iter().zip(y) {
        for (zi, &c) in z.iter_mut().zip(&kept) {
            *zi = (r[c] - means[c]) / stds[c];
        }
        let yc = yv - y_mean;
        for i in 0..k {
            rhs[i] = rhs[i] + z[i] * yc;
            let zi = z[i];
            let row = &mut gram[i * k..(i + 1) * k];
            for j in i..k {
                row[j] = row[j] + zi * z[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            gram[i * k + j] = gram[j * k + i];
        }
    }
    let beta = if k == 0 {
        Vec::new()
    } else {
        let trace: T = (0..k).map(|i| gram[i * k + i]).sum();
        let eps = ridge_factor::<T>() * trace / T::of_usize(k);
        for i in 0..k {
            gram[i * k + i] = gram[i * k + i] + eps;
        }
        cholesky_solve(&gram, &rhs).ok_or(PredictError::Singular)?
    };

    let mut coefficients = vec![T::zero(); d];
    let mut intercept = y_mean;
    for (&c, &b) in kept.iter().zip(&beta) {
        coefficients[c] = b / stds[c];
        intercept = intercept - coefficients[c] * means[c];
    }
    Ok(OlsModel {
        feature_names: feature_names.to_vec(),
        coefficients,
        intercept,
        means,
        stds,
        dropped,
        target_mean: y_mean,
        standardized: kept.into_iter().zip(beta).collect(),
    })
}

/// Coefficient of determination `1 − SS_res / SS_tot`, with `SS_tot` taken
/// about the mean of `y`. Unbounded below.
pub fn r2<T: Scalar>(model: &OlsModel<T>, x: &Matrix<T>, y: &[T]) -> Result<T, PredictError> {
    if x.rows() != y.len() || x.cols() != model.coefficients.len() {
        return Err(PredictError::DimensionMismatch);
    }
    r2_of_predictions(&model.predict_all(x), y)
}

pub fn r2_of_predictions<T: Scalar>(pred: &[T], y: &[T]) -> Result<T, PredictError> {
    if pred.len() != y.len() {
        return Err(PredictError::DimensionMismatch);
    }
    if y.is_empty() {
        return Err(PredictError::ZeroVarianceTarget);
    }
    let mean = y.iter().copied().sum::<T>() / T::of_usize(y.len());
    let ss_tot: T = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    if ss_tot <= T::zero() {
        return Err(PredictError::ZeroVarianceTarget);
    }
    let ss_res: T = pred.iter().zip(y).map(|(&p, &v)| (v - p) * (v - p)).sum();
    Ok(T::one() - ss_res / ss_tot)
}
