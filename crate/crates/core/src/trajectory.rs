//! Output trajectories and sample sets.
//!
//! A [`Trajectory`] stores `(T+1) × n_y` measurements row-major: row `t` holds
//! the output vector measured at time `t·dt`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: Vec<f64>,
    steps: usize,
    output_dim: usize,
    dt: f64,
}

impl Trajectory {
    /// Builds a trajectory from row-major values with `steps = T+1` rows.
    pub fn new(values: Vec<f64>, steps: usize, output_dim: usize, dt: f64) -> Result<Self> {
        if steps == 0 || output_dim == 0 {
            return Err(Error::invalid("trajectory needs at least one row and one output"));
        }
        if values.len() != steps * output_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values ({steps}×{output_dim})", steps * output_dim),
                found: format!("{} values", values.len()),
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive and finite, got {dt}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / output_dim,
                column: i % output_dim,
            });
        }
        Ok(Self {
            values,
            steps,
            output_dim,
            dt,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let output_dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != output_dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of width {output_dim}"),
                found: format!("row of width {}", bad.len()),
            });
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(values, rows.len(), output_dim, dt)
    }

    /// Number of rows, `T+1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The horizon `T` counted in steps.
    pub fn horizon_steps(&self) -> usize {
        self.steps - 1
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.output_dim..(t + 1) * self.output_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.output_dim)
    }

    pub fn is_comparable(&self, other: &Trajectory) -> bool {
        self.steps == other.steps && self.output_dim == other.output_dim && self.dt == other.dt
    }

    pub(crate) fn check_comparable(&self, other: &Trajectory) -> Result<()> {
        if self.is_comparable(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape_string(),
                found: other.shape_string(),
            })
        }
    }

    fn shape_string(&self) -> String {
        format!("{}×{} @ dt={}", self.steps, self.output_dim, self.dt)
    }

    /// Squared Frobenius distance `Σ_t Σ_i (a_ti − b_ti)²`. Shapes are not checked.
    pub(crate) fn squared_distance_unchecked(&self, other: &Trajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum()
    }

    /// Returns a copy with every value shifted by `offset`.
    pub fn translated(&self, offset: f64) -> Trajectory {
        Trajectory {
            values: self.values.iter().map(|v| v + offset).collect(),
            ..self.clone()
        }
    }
}

/// `m ≥ 1` trajectories of identical shape and time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    trajectories: Vec<Trajectory>,
    pub label: String,
}

impl SampleSet {
    pub fn new(trajectories: Vec<Trajectory>, label: impl Into<String>) -> Result<Self> {
        let first = trajectories.first().ok_or(Error::Empty("sample set"))?;
        for t in &trajectories[1..] {
            first.check_comparable(t)?;
        }
        Ok(Self {
            trajectories,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    /// Representative trajectory, used for shape checks.
    pub fn first(&self) -> &Trajectory {
        &self.trajectories[0]
    }

    pub fn steps(&self) -> usize {
        self.first().steps()
    }

    pub fn output_dim(&self) -> usize {
        self.first().output_dim()
    }

    pub fn dt(&self) -> f64 {
        self.first().dt()
    }

    pub(crate) fn check_comparable(&self, other: &SampleSet) -> Result<()> {
        self.first().check_comparable(other.first())
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a Trajectory;
    type IntoIter = std::slice::Iter<'a, Trajectory>;

    fn into_iter(self) -> Self::IntoIter {
        self.trajectories.iter()
    }
}
