use serde::{Deserialize, Serialize};

use super::{quantile_sorted, sample_std, Scalar};

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`.
///
/// Falls back to σ when the IQR is zero, and to `1e-3 · max(|mean|, 1)` for a
/// sample with no spread at all, so a point mass still yields a proper density.
pub fn silverman_bandwidth<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted: Vec<T> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let sigma = sample_std(xs).unwrap_or_else(T::zero);
    let iqr = quantile_sorted(&sorted, 0.75)? - quantile_sorted(&sorted, 0.25)?;
    let robust = iqr / T::of(1.34);
    let mut spread = if robust > T::zero() { sigma.min(robust) } else { sigma };
    if spread <= T::zero() {
        let m = super::mean(xs)?;
        spread = T::of(1e-3) * m.abs().max(T::one());
        // the rule's constant and n-scaling do not apply to a degenerate sample
        return Some(spread);
    }
    let n = T::of_usize(xs.len());
    Some(T::of(0.9) * spread * n.powf(T::of(-0.2)))
}

/// Gaussian kernel density of `xs` with bandwidth `h`, evaluated on `grid`.
pub fn gaussian_kde<T: Scalar>(xs: &[T], h: T, grid: &[T]) -> Vec<T> {
    let norm = T::one() / (T::of_usize(xs.len()) * h * T::of((2.0 * std::f64::consts::PI).sqrt()));
    let half = T::of(0.5);
    grid.iter()
        .map(|&g| {
            let s: T = xs
                .iter()
                .map(|&x| {
                    let z = (g - x) / h;
                    (-half * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect()
}

/// Trapezoid-rule integral of `ys` sampled at `xs`.
pub fn trapezoid<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * T::of(0.5))
        .sum()
}

/// Two density estimates on one shared grid, ready for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeComparison<T> {
    pub grid: Vec<T>,
    pub density_a: Vec<T>,
    pub density_b: Vec<T>,
    pub bandwidth_a: T,
    pub bandwidth_b: T,
}

impl<T: Scalar> KdeComparison<T> {
    pub const DEFAULT_GRID: usize = 513;

    /// Estimates both densities on a grid spanning the pooled range padded by
    /// four of the wider bandwidth on each side. A bandwidth narrower than
    /// about two grid steps is widened to that, so a tight sample next to a
    /// wide one still integrates to one on the grid. `None` if either sample
    /// is empty or non-finite.
    pub fn compare(a: &[T], b: &[T], grid_points: usize) -> Option<Self> {
        if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| !x.is_finite()) {
            return None;
        }
        let n = grid_points.max(3);
        let min = a.iter().chain(b).copied().fold(T::infinity(), T::min);
        let max = a.iter().chain(b).copied().fold(T::neg_infinity(), T::max);
        let (ra, rb) = (silverman_bandwidth(a)?, silverman_bandwidth(b)?);
        let floor = T::of(2.0) * (max - min + T::of(8.0) * ra.max(rb)) / T::of_usize(n - 1);
        let (ha, hb) = (ra.max(floor), rb.max(floor));
        let pad = T::of(4.0) * ha.max(hb);
        let (lo, hi) = (min - pad, max + pad);
        let step = (hi - lo) / T::of_usize(n - 1);
        let grid: Vec<T> = (0..n).map(|i| lo + step * T::of_usize(i)).collect();
        Some(KdeComparison {
            density_a: gaussian_kde(a, ha, &grid),
            density_b: gaussian_kde(b, hb, &grid),
            grid,
            bandwidth_a: ha,
            bandwidth_b: hb,
        })
    }
}
