//! Empirical observability Gramian of the nominal system.
//!
//! For each state coordinate `i` the nominal system is simulated from
//! `x0 ± ε·e_i`, and
//!
//! ```text
//! W_ij = 1/(4ε²) · Σ_{t=0}^{T} (y⁺ⁱ_t − y⁻ⁱ_t)ᵀ (y⁺ʲ_t − y⁻ʲ_t) · dt
//! ```
//!
//! The eigenvector of the smallest eigenvalue is the local direction of
//! weak unobservability.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_deterministic, SimConfig, SystemModel};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Perturbation size used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Relative gap below which the two smallest eigenvalues count as tied.
pub const EIGEN_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianResult {
    pub x0: Vec<f64>,
    pub epsilon: f64,
    /// Row-major `n_x × n_x` Gramian, exactly symmetric.
    pub w: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`; unit norm, first
    /// nonzero component positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `None` when the smallest eigenvalue is not simple.
    pub null_direction: Option<Vec<f64>>,
    pub degenerate_eigenspace: bool,
}

impl GramianResult {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.w.len();
        DMatrix::from_fn(n, n, |i, j| self.w[i][j])
    }

    /// `λ_min / λ_max`.
    pub fn eigenvalue_ratio(&self) -> f64 {
        let max = *self.eigenvalues.last().expect("non-empty spectrum");
        self.eigenvalues[0] / max
    }
}

fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(&first) = v.iter().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
    v
}

pub fn empirical_gramian(model: &SystemModel, x0: &[f64], epsilon: f64, sim: &SimConfig) -> Result<GramianResult> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if x0.len() != model.state_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("state of dimension {}", model.state_dim),
            found: format!("dimension {}", x0.len()),
        });
    }
    let nominal = model.nominal();
    let n = model.state_dim;
    let runs: Vec<Result<Trajectory>> = (0..2 * n)
        .into_par_iter()
        .map(|k| {
            let (i, sign) = (k / 2, if k % 2 == 0 { 1.0 } else { -1.0 });
            let mut x = x0.to_vec();
            x[i] += sign * epsilon;
            simulate_deterministic(&nominal, &x, sim).map(|(_, y)| y)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let diffs: Vec<Vec<f64>> = runs
        .chunks_exact(2)
        .map(|pair| {
            pair[0]
                .values()
                .iter()
                .zip(pair[1].values())
                .map(|(p, m)| p - m)
                .collect()
        })
        .collect();

    let scale = sim.dt / (4.0 * epsilon * epsilon);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a * b).sum();
            w[(i, j)] = dot * scale;
            w[(j, i)] = w[(i, j)];
        }
    }

    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| canonical_sign(eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();

    let spread = eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let degenerate = n > 1 && eigenvalues[1] - eigenvalues[0] <= EIGEN_TIE_TOLERANCE * spread.max(f64::MIN_POSITIVE);
    Ok(GramianResult {
        x0: x0.to_vec(),
        epsilon,
        w: (0..n).map(|i| w.row(i).iter().copied().collect()).collect(),
        null_direction: (!degenerate).then(|| eigenvectors[0].clone()),
        eigenvalues,
        eigenvectors,
        degenerate_eigenspace: degenerate,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Unsigned angle in degrees between `direction` and the hyperplane
/// orthogonal to `grad(x0)`; 0° means tangent to the level set.
pub fn tangent_alignment(direction: &[f64], x0: &[f64], grad: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let g = grad(x0);
    let (gn, dn) = (norm(&g), norm(direction));
    if gn == 0.0 {
        return Err(Error::ZeroGradient);
    }
    if dn == 0.0 || g.len() != direction.len() {
        return Err(Error::invalid(
            "direction must be a nonzero vector of the state dimension",
        ));
    }
    let cos_to_normal = direction.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs() / (gn * dn);
    Ok(cos_to_normal.min(1.0).asin().to_degrees())
}

/// Unsigned angle in degrees between the lines spanned by `u` and `v`.
pub fn line_angle(u: &[f64], v: &[f64]) -> f64 {
    let c = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs() / (norm(u) * norm(v));
    c.min(1.0).acos().to_degrees()
}
