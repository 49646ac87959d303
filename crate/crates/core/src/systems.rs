//! Ready-made system models: a linear system with a periodic, non-centered
//! process perturbation, the stochastic Duffing oscillator, and a generic
//! discrete-time linear system.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};

/// `dX = (A X + A0 sin(ωt)) dt + Σ dW`, `Y = C X + ε`, `ε ~ N(0, meas_var)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearDriftParams {
    pub a: [[f64; 2]; 2],
    pub a0: [f64; 2],
    pub omega: f64,
    pub sigma: [[f64; 2]; 2],
    pub c: [f64; 2],
    pub meas_var: f64,
}

impl Default for LinearDriftParams {
    fn default() -> Self {
        Self {
            a: [[-2.0, -1.0], [-1.0, -2.0]],
            a0: [3.0, 3.0],
            omega: 2.0,
            sigma: [[0.1, 0.0], [0.0, 0.1]],
            c: [-1.0, 1.0],
            meas_var: 0.01,
        }
    }
}

impl LinearDriftParams {
    /// True when `v` spans an A-invariant subspace annihilated by C (and by
    /// the forcing direction), i.e. shifting the initial state along `v`
    /// leaves the nominal output unchanged.
    pub fn is_unobservable_direction(&self, v: [f64; 2]) -> bool {
        let av = [
            self.a[0][0] * v[0] + self.a[0][1] * v[1],
            self.a[1][0] * v[0] + self.a[1][1] * v[1],
        ];
        let parallel = av[0] * v[1] - av[1] * v[0] == 0.0;
        let c_null = self.c[0] * v[0] + self.c[1] * v[1] == 0.0;
        parallel && c_null
    }

    pub fn noise_free(&self) -> Self {
        Self {
            sigma: [[0.0; 2]; 2],
            meas_var: 0.0,
            ..self.clone()
        }
    }
}

pub fn linear_drift_system(p: &LinearDriftParams) -> SystemModel {
    let (a, a0, omega, sigma, c) = (p.a, p.a0, p.omega, p.sigma, p.c);
    SystemModel::new(
        "linear_drift",
        2,
        1,
        move |x, t, f| {
            let s = (omega * t).sin();
            f[0] = a[0][0] * x[0] + a[0][1] * x[1] + a0[0] * s;
            f[1] = a[1][0] * x[0] + a[1][1] * x[1] + a0[1] * s;
        },
        move |x, y| y[0] = c[0] * x[0] + c[1] * x[1],
    )
    .with_diffusion(2, move |_, _, g| {
        for r in 0..2 {
            for k in 0..2 {
                g[(r, k)] = sigma[r][k];
            }
        }
    })
    .with_gaussian_measurement_noise(p.meas_var)
}

/// Diffusion gains and measurement-noise variance of the Duffing oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuffingParams {
    pub b1: f64,
    pub b2: f64,
    pub meas_var: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        Self::low_noise()
    }
}

impl DuffingParams {
    pub fn low_noise() -> Self {
        Self {
            b1: 0.05,
            b2: 0.05,
            meas_var: 0.5,
        }
    }

    pub fn high_noise() -> Self {
        Self {
            b1: 0.5,
            b2: 0.5,
            meas_var: 0.5,
        }
    }
}

/// `h(x) = −½x₁² + ½x₂² + ¼x₁⁴`, conserved by the nominal Duffing flow.
pub fn hamiltonian(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    -0.5 * x1 * x1 + 0.5 * x2 * x2 + 0.25 * x1 * x1 * x1 * x1
}

pub fn hamiltonian_gradient(x: &[f64]) -> Vec<f64> {
    vec![-x[0] + x[0] * x[0] * x[0], x[1]]
}

/// `dX₁ = X₂ dt + b₁ dW₁`, `dX₂ = (X₁ − X₁³) dt + b₂ dW₂`, `Y = h(X) + ε`.
pub fn duffing_system(p: &DuffingParams) -> SystemModel {
    let (b1, b2) = (p.b1, p.b2);
    SystemModel::new(
        "duffing",
        2,
        1,
        |x, _, f| {
            f[0] = x[1];
            f[1] = x[0] - x[0] * x[0] * x[0];
        },
        |x, y| y[0] = hamiltonian(x),
    )
    .with_diffusion(2, move |_, _, g| {
        g[(0, 0)] = b1;
        g[(0, 1)] = 0.0;
        g[(1, 0)] = 0.0;
        g[(1, 1)] = b2;
    })
    .with_gaussian_measurement_noise(p.meas_var)
}

/// Discrete-time `x_{t+1} = A x_t + Q η_t`, `y_t = C x_t + R ε_t` with
/// standard-normal `η`, `ε`. Time is counted in steps (use `dt = 1`).
pub fn discrete_linear_system(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<SystemModel> {
    let n = a.nrows();
    let p = c.nrows();
    let dims_ok = a.is_square() && n > 0 && p > 0 && c.ncols() == n && q.nrows() == n && r.nrows() == p;
    if !dims_ok {
        return Err(Error::ShapeMismatch {
            expected: format!("A n×n, C p×n, Q n×q, R p×r with n = {n}, p = {p}"),
            found: format!(
                "A {:?}, C {:?}, Q {:?}, R {:?}",
                a.shape(),
                c.shape(),
                q.shape(),
                r.shape()
            ),
        });
    }
    let (a, c, q, r) = (a.clone(), c.clone(), q.clone(), r.clone());
    let r_cols = r.ncols();
    let model = SystemModel::new(
        "discrete_linear",
        n,
        p,
        move |x, _, f| {
            let next = &a * DVector::from_column_slice(x);
            f.copy_from_slice(next.as_slice());
        },
        move |x, y| {
            let out = &c * DVector::from_column_slice(x);
            y.copy_from_slice(out.as_slice());
        },
    )
    .discrete()
    .with_diffusion(q.ncols(), move |_, _, g| g.copy_from(&q))
    .with_additive_noise(move |rng, e| {
        let eps = DVector::from_fn(r_cols, |_, _| StandardNormal.sample(rng));
        e.copy_from_slice((&r * eps).as_slice());
    });
    Ok(model)
}
