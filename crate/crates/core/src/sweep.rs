//! Grid sweeps of the two-sample test over candidate initial states.
//!
//! One reference set is simulated from `x_a`; every grid cell `x_b` gets a
//! fresh set on its own substream and is tested against the reference with
//! a single, shared kernel width.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_output_set_at, InitialSpec, SimConfig, SystemModel};
use crate::error::{Error, Result};
use crate::io::format_float;
use crate::kernels::{median_pairwise_distance, sigma_from_medians, KernelConfig};
use crate::mmd::{two_sample_test, TestConfig, TestResult, ThresholdMethod};
use crate::rng::{domain, substream, substream_key};
use crate::trajectory::SampleSet;

/// Default cap on the number of cells used to compute the automatic width.
pub const DEFAULT_SIGMA_CELL_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// State coordinate swept along this axis (0-based).
    pub dim: usize,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Axis {
    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.upper
        } else {
            self.lower + (self.upper - self.lower) * k as f64 / (self.points - 1) as f64
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    /// Full state; swept coordinates are overwritten per cell.
    pub base: Vec<f64>,
}

impl GridSpec {
    /// A 2-D grid over state coordinates 0 and 1 of a 2-dimensional state.
    pub fn planar(lower: [f64; 2], upper: [f64; 2], points: [usize; 2]) -> Self {
        Self {
            axes: (0..2)
                .map(|d| Axis {
                    dim: d,
                    lower: lower[d],
                    upper: upper[d],
                    points: points[d],
                })
                .collect(),
            base: vec![0.0; 2],
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        if self.base.len() != state_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("grid base state of dimension {state_dim}"),
                found: format!("dimension {}", self.base.len()),
            });
        }
        for (k, ax) in self.axes.iter().enumerate() {
            if ax.points < 2 {
                return Err(Error::invalid(format!("axis {k}: need at least 2 points")));
            }
            if ax.dim >= state_dim || self.axes[..k].iter().any(|o| o.dim == ax.dim) {
                return Err(Error::invalid(format!(
                    "axis {k}: invalid or repeated dimension {}",
                    ax.dim
                )));
            }
            if !(ax.lower.is_finite() && ax.upper.is_finite() && ax.lower < ax.upper) {
                return Err(Error::invalid(format!("axis {k}: need finite lower < upper")));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// State of cell `c`; the first axis varies slowest.
    pub fn cell_state(&self, mut c: usize) -> Vec<f64> {
        let mut x = self.base.clone();
        for ax in self.axes.iter().rev() {
            x[ax.dim] = ax.value(c % ax.points);
            c /= ax.points;
        }
        x
    }

    pub fn cells(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.cell_count()).map(|c| self.cell_state(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Fixed(KernelConfig),
    /// Width from the median/quantile meta-heuristic over the grid.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub m: usize,
    pub sim: SimConfig,
    pub kernel: KernelChoice,
    pub test: TestConfig,
    pub sigma_cell_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub state: Vec<f64>,
    pub outcome: Option<TestResult>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn triggered(&self) -> Option<bool> {
        self.outcome.as_ref().map(|o| o.trigger)
    }

    pub fn mmd_hat(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.mmd_hat)
    }

    pub fn status(&self) -> &str {
        match (&self.outcome, &self.error) {
            (Some(_), _) => "ok",
            (None, Some(e)) if e.starts_with("simulation blew up") => "blowup",
            _ => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: GridSpec,
    pub reference: Vec<f64>,
    pub sigma: f64,
    pub sigma_auto: bool,
    pub m: usize,
    pub alpha: f64,
    pub method: ThresholdMethod,
    pub n_permutations: usize,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub records: Vec<CellRecord>,
}

fn cell_set(model: &SystemModel, state: &[f64], m: usize, sim: &SimConfig, cell: usize) -> Result<SampleSet> {
    sample_output_set_at(
        model,
        &InitialSpec::Point(state.to_vec()),
        m,
        sim,
        &[domain::SWEEP_CELL, cell as u64],
    )
}

/// Cells used for the automatic width: all of them, or a seeded subsample of `cap`.
fn sigma_cells(count: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut cells: Vec<usize> = (0..count).collect();
    if count > cap {
        cells.shuffle(&mut substream(seed, &[domain::SIGMA_SUBSAMPLE]));
        cells.truncate(cap.max(1));
        cells.sort_unstable();
    }
    cells
}

/// The meta-heuristic width over `(reference, cell)` pairs. Uses every cell,
/// or a seeded subsample of `cfg.sigma_cell_cap` cells on larger grids.
/// Cells whose simulation fails are skipped.
pub fn grid_sigma(model: &SystemModel, reference: &SampleSet, grid: &GridSpec, cfg: &SweepConfig) -> Result<f64> {
    let chosen = sigma_cells(grid.cell_count(), cfg.sigma_cell_cap, cfg.sim.seed);
    let medians: Vec<f64> = chosen
        .par_iter()
        .filter_map(|&c| {
            let set = cell_set(model, &grid.cell_state(c), cfg.m, &cfg.sim, c).ok()?;
            match median_pairwise_distance(reference, &set) {
                Ok(d) => Some(Ok(d)),
                Err(Error::DegenerateDistances) => Some(Ok(0.0)),
                Err(e) => Some(Err(e)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    sigma_from_medians(&medians)
}

/// Simulates the reference set of a sweep.
pub fn reference_set(model: &SystemModel, x_a: &[f64], cfg: &SweepConfig) -> Result<SampleSet> {
    sample_output_set_at(
        model,
        &InitialSpec::Point(x_a.to_vec()),
        cfg.m,
        &cfg.sim,
        &[domain::SWEEP_REFERENCE],
    )
}

/// Runs the sweep. Every random quantity is keyed by `(sim.seed, cell)`, so
/// the result is identical for any thread count.
pub fn grid_sweep(model: &SystemModel, x_a: &[f64], grid: &GridSpec, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.m < 2 {
        return Err(Error::invalid("sweeps need m ≥ 2 trajectories per set"));
    }
    grid.validate(model.state_dim)?;
    cfg.test.validate()?;
    let sim = cfg.sim;
    let reference = reference_set(model, x_a, cfg)?;

    let (kernel, sigma_auto) = match cfg.kernel {
        KernelChoice::Fixed(k) => (k, false),
        KernelChoice::Auto => (KernelConfig::gaussian(grid_sigma(model, &reference, grid, cfg)?)?, true),
    };

    let records: Vec<CellRecord> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let state = grid.cell_state(c);
            let tcfg = TestConfig {
                seed: substream_key(cfg.test.seed, &[domain::SWEEP_CELL, c as u64]),
                ..cfg.test
            };
            let outcome = cell_set(model, &state, cfg.m, &sim, c)
                .and_then(|set| two_sample_test(&reference, &set, &kernel, &tcfg));
            match outcome {
                Ok(o) => CellRecord {
                    state,
                    outcome: Some(o),
                    error: None,
                },
                Err(e) => CellRecord {
                    state,
                    outcome: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok(SweepResult {
        grid: grid.clone(),
        reference: x_a.to_vec(),
        sigma: kernel.sigma,
        sigma_auto,
        m: cfg.m,
        alpha: cfg.test.alpha,
        method: cfg.test.method,
        n_permutations: cfg.test.n_permutations,
        seed: sim.seed,
        horizon: sim.horizon,
        dt: sim.dt,
        records,
    })
}

/// Grid states where the test ran and did not trigger.
pub fn indistinguishability_class(result: &SweepResult) -> Vec<Vec<f64>> {
    result
        .records
        .iter()
        .filter(|r| r.triggered() == Some(false))
        .map(|r| r.state.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlignmentSummary {
    Empty,
    Summary { count: usize, max_abs: f64, mean_abs: f64 },
}

/// Max and mean of `|predicate|` over the class points. The predicate should
/// vanish on the analytic class of indistinguishability.
pub fn class_alignment_metric(points: &[Vec<f64>], predicate: impl Fn(&[f64]) -> f64) -> AlignmentSummary {
    if points.is_empty() {
        return AlignmentSummary::Empty;
    }
    let values: Vec<f64> = points.iter().map(|p| predicate(p).abs()).collect();
    AlignmentSummary::Summary {
        count: values.len(),
        max_abs: values.iter().copied().fold(0.0, f64::max),
        mean_abs: values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Metadata written alongside the per-cell table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepHeader {
    pub model: String,
    pub grid: GridSpec,
    pub reference_state: Vec<f64>,
    pub sigma: f64,
    pub sigma_auto: bool,
    pub alpha: f64,
    pub method: ThresholdMethod,
    pub n_permutations: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub cells: usize,
    pub columns: Vec<String>,
}

impl SweepResult {
    fn coordinate_columns(&self) -> Vec<String> {
        self.grid.axes.iter().map(|a| format!("x{}", a.dim + 1)).collect()
    }

    pub fn header(&self, model: &str) -> SweepHeader {
        let mut columns = self.coordinate_columns();
        columns.extend(["mmd_hat", "kappa", "ratio", "trigger", "status"].map(String::from));
        SweepHeader {
            model: model.to_string(),
            grid: self.grid.clone(),
            reference_state: self.reference.clone(),
            sigma: self.sigma,
            sigma_auto: self.sigma_auto,
            alpha: self.alpha,
            method: self.method,
            n_permutations: self.n_permutations,
            m: self.m,
            n: self.m,
            seed: self.seed,
            horizon: self.horizon,
            dt: self.dt,
            cells: self.records.len(),
            columns,
        }
    }

    /// The per-cell table: swept coordinates, then
    /// `mmd_hat,kappa,ratio,trigger,status`. Failed cells leave the numeric
    /// fields empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.coordinate_columns();
        header.extend(["mmd_hat", "kappa", "ratio", "trigger", "status"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row: Vec<String> = self.grid.axes.iter().map(|a| format_float(r.state[a.dim])).collect();
            match &r.outcome {
                Some(o) => {
                    row.push(format_float(o.mmd_hat));
                    row.push(format_float(o.kappa));
                    row.push(o.ratio.map(format_float).unwrap_or_default());
                    row.push(o.trigger.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row.push(r.status().to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}
