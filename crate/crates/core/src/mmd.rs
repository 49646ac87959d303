//! Finite-sample MMD estimation and the two-sample distinguishability test.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{squared_distance_matrix, KernelConfig};
use crate::rng::{domain, substream};
use crate::stats::{canonical_sum, lower_quantile};
use crate::trajectory::{SampleSet, Trajectory};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_PERMUTATIONS: usize = 1000;
pub const MIN_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Analytic,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub method: ThresholdMethod,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            method: ThresholdMethod::Bootstrap,
            n_permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn analytic(alpha: f64) -> Self {
        Self {
            alpha,
            method: ThresholdMethod::Analytic,
            ..Self::default()
        }
    }

    pub fn bootstrap(alpha: f64, seed: u64) -> Self {
        Self {
            alpha,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.method == ThresholdMethod::Bootstrap && self.n_permutations < MIN_PERMUTATIONS {
            return Err(Error::invalid(format!(
                "bootstrap needs at least {MIN_PERMUTATIONS} permutations, got {}",
                self.n_permutations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub mmd_hat: f64,
    pub mmd_sq_hat: f64,
    pub kappa: f64,
    pub trigger: bool,
    /// `mmd_hat / kappa`; absent when `kappa = 0`.
    pub ratio: Option<f64>,
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub method: ThresholdMethod,
    /// Set when every pooled trajectory was identical and the bootstrap null collapsed to 0.
    #[serde(default)]
    pub degenerate_pool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapThreshold {
    pub kappa: f64,
    pub degenerate_pool: bool,
}

/// Kernel matrix over the pool `A ∪ B` (A first).
struct PooledGram {
    k: DMatrix<f64>,
    m: usize,
    n: usize,
    all_identical: bool,
}

impl PooledGram {
    fn new(a: &SampleSet, b: &SampleSet, cfg: &KernelConfig) -> Result<Self> {
        a.check_comparable(b)?;
        let pool: Vec<&Trajectory> = a.iter().chain(b.iter()).collect();
        let d2 = squared_distance_matrix(&pool);
        let all_identical = d2.iter().all(|&v| v == 0.0);
        Ok(Self {
            k: d2.map(|v| cfg.eval_squared_distance(v)),
            m: a.len(),
            n: b.len(),
            all_identical,
        })
    }

    /// Sum of `k` over the ordered pairs `rows × cols`, as a function of the
    /// multiset of kernel values only. Using the same construction for all
    /// three terms makes `A = B` give exactly zero.
    fn block_sum(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        let values: Vec<f64> = rows
            .flat_map(|i| cols.clone().map(move |j| (i, j)))
            .map(|(i, j)| self.k[(i, j)])
            .collect();
        canonical_sum(values)
    }

    fn biased_mmd_squared(&self) -> f64 {
        let (m, n) = (self.m, self.n);
        let kaa = self.block_sum(0..m, 0..m);
        let kbb = self.block_sum(m..m + n, m..m + n);
        let kab = self.block_sum(0..m, m..m + n);
        let (mf, nf) = (m as f64, n as f64);
        kaa / (mf * mf) + kbb / (nf * nf) - 2.0 * kab / (mf * nf)
    }

    /// `MMD` of a balanced split given by `signs` (+1 first half, −1 second).
    fn split_mmd(&self, signs: &[f64]) -> f64 {
        let half = (signs.len() / 2) as f64;
        let n = signs.len();
        let mut total = 0.0;
        for i in 0..n {
            // K is symmetric, so the contiguous column stands in for row i.
            let row: f64 = self
                .k
                .column(i)
                .rows_range(i + 1..)
                .iter()
                .zip(&signs[i + 1..])
                .map(|(k, s)| s * k)
                .sum();
            total += self.k[(i, i)] + 2.0 * signs[i] * row;
        }
        (total / (half * half)).max(0.0).sqrt()
    }
}

/// Biased (V-statistic) estimate of MMD² between the laws behind `a` and `b`.
///
/// The raw value is returned; it is nonnegative up to rounding (≥ −1e−12).
/// Sums are taken over sorted kernel values, so the result is exactly
/// symmetric in `(a, b)` and invariant to reordering either set.
pub fn mmd_squared_biased(a: &SampleSet, b: &SampleSet, cfg: &KernelConfig) -> Result<f64> {
    Ok(PooledGram::new(a, b, cfg)?.biased_mmd_squared())
}

/// `κ = √(2B/m) · (1 + √(2 ln α⁻¹))`. `alpha = 1` is accepted (κ = √(2B/m)).
pub fn analytic_threshold(m: usize, bound: f64, alpha: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::invalid(format!("kernel bound must be positive, got {bound}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1], got {alpha}")));
    }
    Ok((2.0 * bound / m as f64).sqrt() * (1.0 + (2.0 * (1.0 / alpha).ln()).sqrt()))
}

/// Permutation-null threshold: pools both sets, draws `n_permutations`
/// balanced splits (each from its own substream of `tcfg.seed`), and returns
/// the lower `(1 − α)` empirical quantile of the split MMDs.
pub fn bootstrap_threshold(
    a: &SampleSet,
    b: &SampleSet,
    cfg: &KernelConfig,
    tcfg: &TestConfig,
) -> Result<BootstrapThreshold> {
    check_balanced(a, b)?;
    let gram = PooledGram::new(a, b, cfg)?;
    bootstrap_from_gram(&gram, tcfg)
}

fn check_balanced(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch { m: a.len(), n: b.len() });
    }
    Ok(())
}

fn bootstrap_from_gram(gram: &PooledGram, tcfg: &TestConfig) -> Result<BootstrapThreshold> {
    if gram.m < 2 {
        return Err(Error::invalid(
            "bootstrap threshold needs at least 2 trajectories per set",
        ));
    }
    if tcfg.n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be positive"));
    }
    if gram.all_identical {
        return Ok(BootstrapThreshold {
            kappa: 0.0,
            degenerate_pool: true,
        });
    }
    let pool = gram.m + gram.n;
    let null: Vec<f64> = (0..tcfg.n_permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(tcfg.seed, &[domain::BOOTSTRAP, p as u64]);
            let mut order: Vec<usize> = (0..pool).collect();
            order.shuffle(&mut rng);
            let mut signs = vec![-1.0; pool];
            for &i in &order[..gram.m] {
                signs[i] = 1.0;
            }
            gram.split_mmd(&signs)
        })
        .collect();
    let kappa = lower_quantile(&null, 1.0 - tcfg.alpha).expect("non-empty null sample");
    Ok(BootstrapThreshold {
        kappa,
        degenerate_pool: false,
    })
}

/// Tests `H0: same output law` at level `alpha`. Requires `|A| = |B|`.
///
/// `trigger` is `mmd_hat ≥ kappa`, except that an estimate of exactly zero
/// never triggers (this only matters for a collapsed bootstrap null, κ = 0).
pub fn two_sample_test(a: &SampleSet, b: &SampleSet, cfg: &KernelConfig, tcfg: &TestConfig) -> Result<TestResult> {
    tcfg.validate()?;
    check_balanced(a, b)?;
    let gram = PooledGram::new(a, b, cfg)?;
    let mmd_sq_hat = gram.biased_mmd_squared();
    let mmd_hat = mmd_sq_hat.max(0.0).sqrt();
    let (kappa, degenerate_pool) = match tcfg.method {
        ThresholdMethod::Analytic => (analytic_threshold(a.len(), cfg.bound, tcfg.alpha)?, false),
        ThresholdMethod::Bootstrap => {
            let t = bootstrap_from_gram(&gram, tcfg)?;
            (t.kappa, t.degenerate_pool)
        }
    };
    Ok(TestResult {
        mmd_hat,
        mmd_sq_hat,
        kappa,
        trigger: mmd_hat >= kappa && mmd_hat > 0.0,
        ratio: (kappa > 0.0).then(|| mmd_hat / kappa),
        m: a.len(),
        n: b.len(),
        alpha: tcfg.alpha,
        method: tcfg.method,
        degenerate_pool,
    })
}

/// The deviation radius `2(√(B/m) + √(B/n))` of the concentration bound.
pub fn deviation_envelope(m: usize, n: usize, bound: f64) -> f64 {
    2.0 * ((bound / m as f64).sqrt() + (bound / n as f64).sqrt())
}

/// Upper bound `2·exp(−ε²/(2B) · mn/(m+n))` on the probability that the
/// estimate deviates from the population MMD by more than
/// `deviation_envelope(m, n, B) + ε`.
pub fn concentration_probability(m: usize, n: usize, bound: f64, epsilon: f64) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m and n must be at least 1"));
    }
    if !(bound > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::invalid("bound must be positive and epsilon nonnegative"));
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(2.0 * (-(epsilon * epsilon) / (2.0 * bound) * (mf * nf / (mf + nf))).exp())
}

/// The real-valued lower bound on `m` that guarantees rejection with
/// probability at least `1 − β` when the population MMD is `z`.
pub fn min_sample_bound(z: f64, bound: f64, beta: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::invalid(format!(
            "population MMD z must be positive (z = {z} needs unbounded data)"
        )));
    }
    if !(bound > 0.0) {
        return Err(Error::invalid("kernel bound must be positive"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0,1), got {beta}")));
    }
    let inner = 4.0 + 2f64.sqrt() + 2.0 * ((1.0 / beta).ln().sqrt() + (2.0 / beta).ln().sqrt());
    Ok(bound / (z * z) * inner * inner)
}

/// Smallest integer sample size strictly above [`min_sample_bound`].
pub fn min_sample_size(z: f64, bound: f64, beta: f64) -> Result<u64> {
    Ok(min_sample_bound(z, bound, beta)?.floor() as u64 + 1)
}
