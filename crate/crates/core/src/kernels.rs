//! Gaussian kernel on trajectory space and bandwidth selection.
//!
//! Trajectories are compared as flattened `(T+1)·n_y` vectors:
//!
//! ```text
//! k(a, b) = exp(−‖a − b‖²_F / (2σ²))
//! ```

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::trajectory::{SampleSet, Trajectory};

/// Quantile of per-pair median distances used by [`sigma_meta_heuristic`].
pub const SIGMA_QUANTILE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    /// Upper bound `B` on kernel values, consumed by the analytic thresholds.
    pub bound: f64,
}

impl KernelConfig {
    /// Gaussian kernel of width `sigma`; its values lie in (0, 1] so `B = 1`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma, bound: 1.0 })
    }

    #[inline]
    pub(crate) fn eval_squared_distance(&self, d2: f64) -> f64 {
        (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

pub fn gaussian_kernel(a: &Trajectory, b: &Trajectory, cfg: &KernelConfig) -> Result<f64> {
    a.check_comparable(b)?;
    Ok(cfg.eval_squared_distance(a.squared_distance_unchecked(b)))
}

/// `K[i][j] = k(A_i, B_j)`. Rows are computed in parallel; every entry is an
/// independent computation so the result does not depend on scheduling.
pub fn gram_matrix(a: &SampleSet, b: &SampleSet, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    a.check_comparable(b)?;
    let rows: Vec<Vec<f64>> = a
        .trajectories()
        .par_iter()
        .map(|ta| {
            b.iter()
                .map(|tb| cfg.eval_squared_distance(ta.squared_distance_unchecked(tb)))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Squared distances between every pair of trajectories in `pool`, as a
/// symmetric matrix with zero diagonal. Only the upper triangle is computed.
pub(crate) fn squared_distance_matrix(pool: &[&Trajectory]) -> DMatrix<f64> {
    let n = pool.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| pool[i].squared_distance_unchecked(pool[j]))
                .collect()
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Median Frobenius distance over all unordered pairs of distinct
/// trajectories (by index) in `A ∪ B`, within-set pairs included.
pub fn median_pairwise_distance(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    a.check_comparable(b)?;
    let pool: Vec<&Trajectory> = a.iter().chain(b.iter()).collect();
    let d2 = squared_distance_matrix(&pool);
    median_from_squared_distances(&d2)
}

pub(crate) fn median_from_squared_distances(d2: &DMatrix<f64>) -> Result<f64> {
    let n = d2.nrows();
    let dists: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[(i, j)].sqrt())
        .collect();
    if dists.iter().all(|&d| d == 0.0) {
        return Err(Error::DegenerateDistances);
    }
    Ok(stats::median(&dists).expect("at least one pair"))
}

/// The bandwidth meta-heuristic: the lower 0.1-quantile of the per-pair
/// median distances. Pairs whose median is zero are skipped.
pub fn sigma_meta_heuristic<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a SampleSet, &'a SampleSet)>,
{
    let mut medians = Vec::new();
    for (a, b) in pairs {
        match median_pairwise_distance(a, b) {
            Ok(d) => medians.push(d),
            Err(Error::DegenerateDistances) => medians.push(0.0),
            Err(e) => return Err(e),
        }
    }
    sigma_from_medians(&medians)
}

/// Applies the quantile rule to precomputed per-pair medians.
pub fn sigma_from_medians(medians: &[f64]) -> Result<f64> {
    if medians.is_empty() {
        return Err(Error::Empty("list of sample-set pairs"));
    }
    let positive: Vec<f64> = medians.iter().copied().filter(|&d| d > 0.0).collect();
    stats::lower_quantile(&positive, SIGMA_QUANTILE).ok_or(Error::DegenerateDistances)
}
