//! Trajectory simulation for deterministic and stochastic system models.
//!
//! Continuous-time models are integrated with explicit Euler (nominal) or
//! Euler–Maruyama (stochastic):
//!
//! ```text
//! x_{t+1} = x_t + f(x_t, t·dt)·dt + G(x_t, t·dt)·√dt·w_t,   w_t ~ N(0, I)
//! y_t     = h(x_t) + ε_t
//! ```
//!
//! Discrete-time models use `x_{t+1} = F(x_t, t) + G(x_t, t)·w_t` with the
//! drift closure playing the role of the transition map. One measurement is
//! emitted per integration step, including `t = 0`, so a horizon of `T`
//! steps yields `T+1` rows.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};
use crate::trajectory::{SampleSet, Trajectory};

pub type DriftFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;
pub type DiffusionFn = dyn Fn(&[f64], f64, &mut DMatrix<f64>) + Send + Sync;
pub type MeasurementFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
pub type NoiseSamplerFn = dyn Fn(&mut StreamRng, &mut [f64]) + Send + Sync;
pub type NoisyMeasurementFn = dyn Fn(&[f64], &mut StreamRng, &mut [f64]) + Send + Sync;
pub type InitialSamplerFn = dyn Fn(&mut StreamRng) -> Vec<f64> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeModel {
    Continuous,
    Discrete,
}

#[derive(Clone)]
pub enum MeasurementNoise {
    None,
    /// `y = h(x) + ε`, with the sampler writing `ε`.
    Additive(Arc<NoiseSamplerFn>),
    /// General `y = H(x, ε)`; the closure writes the full noisy output.
    Combined(Arc<NoisyMeasurementFn>),
}

#[derive(Clone)]
pub struct Diffusion {
    pub noise_dim: usize,
    pub map: Arc<DiffusionFn>,
}

/// A (possibly stochastic) dynamical system with outputs. Cloning is cheap
/// and the closures are shared immutably across threads.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub state_dim: usize,
    pub output_dim: usize,
    pub time: TimeModel,
    pub drift: Arc<DriftFn>,
    pub diffusion: Option<Diffusion>,
    pub measurement: Arc<MeasurementFn>,
    pub measurement_noise: MeasurementNoise,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("output_dim", &self.output_dim)
            .field("time", &self.time)
            .field("noise_dim", &self.diffusion.as_ref().map(|d| d.noise_dim))
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    /// A noise-free continuous-time model `ẋ = f(x, t)`, `y = h(x)`.
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        output_dim: usize,
        drift: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
        measurement: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            state_dim,
            output_dim,
            time: TimeModel::Continuous,
            drift: Arc::new(drift),
            diffusion: None,
            measurement: Arc::new(measurement),
            measurement_noise: MeasurementNoise::None,
        }
    }

    pub fn discrete(mut self) -> Self {
        self.time = TimeModel::Discrete;
        self
    }

    pub fn with_diffusion(
        mut self,
        noise_dim: usize,
        map: impl Fn(&[f64], f64, &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Some(Diffusion {
            noise_dim,
            map: Arc::new(map),
        });
        self
    }

    pub fn with_additive_noise(mut self, sampler: impl Fn(&mut StreamRng, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.measurement_noise = MeasurementNoise::Additive(Arc::new(sampler));
        self
    }

    /// Additive `N(0, variance·I)` measurement noise.
    pub fn with_gaussian_measurement_noise(self, variance: f64) -> Self {
        let std = variance.sqrt();
        self.with_additive_noise(move |rng, out| {
            for e in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *e = std * z;
            }
        })
    }

    pub fn with_noisy_measurement(
        mut self,
        map: impl Fn(&[f64], &mut StreamRng, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.measurement_noise = MeasurementNoise::Combined(Arc::new(map));
        self
    }

    /// The same model with process and measurement noise removed.
    pub fn nominal(&self) -> SystemModel {
        SystemModel {
            diffusion: None,
            measurement_noise: MeasurementNoise::None,
            ..self.clone()
        }
    }

    pub fn eval_drift(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.drift)(x, t, &mut out);
        out
    }

    pub fn eval_measurement(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim];
        (self.measurement)(x, &mut out);
        out
    }
}

/// Initial condition: a point (Dirac) or a distribution over states.
#[derive(Clone)]
pub enum InitialSpec {
    Point(Vec<f64>),
    /// Independent Gaussian coordinates.
    Gaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    Sampler(Arc<InitialSamplerFn>),
}

impl fmt::Debug for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Point(x) => f.debug_tuple("Point").field(x).finish(),
            InitialSpec::Gaussian { mean, std } => f
                .debug_struct("Gaussian")
                .field("mean", mean)
                .field("std", std)
                .finish(),
            InitialSpec::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl InitialSpec {
    pub fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            InitialSpec::Point(x) => x.clone(),
            InitialSpec::Gaussian { mean, std } => mean
                .iter()
                .zip(std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect(),
            InitialSpec::Sampler(f) => f(rng),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialSpec::Point(x) => format!("{x:?}"),
            InitialSpec::Gaussian { mean, std } => format!("N({mean:?}, diag{std:?}²)"),
            InitialSpec::Sampler(_) => "custom sampler".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        let cfg = Self { horizon, dt, seed };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Number of integration steps `T = horizon / dt`, which must be a positive integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon and dt must be positive"));
        }
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "dt = {} does not divide horizon = {}",
                self.dt, self.horizon
            )));
        }
        Ok(steps as usize)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// The `(T+1) × n_x` states visited by a simulation, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub states: Vec<f64>,
    pub state_dim: usize,
}

impl StatePath {
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn check_state(model: &SystemModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.state_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("state of dimension {}", model.state_dim),
            found: format!("dimension {}", x0.len()),
        });
    }
    Ok(())
}

/// Deterministic step `x ← x + f(x,t)·dt` (continuous) or `x ← F(x,t)` (discrete).
#[inline]
fn nominal_step(model: &SystemModel, x: &mut [f64], t: f64, dt: f64, rate: &mut [f64]) {
    (model.drift)(x, t, rate);
    match model.time {
        TimeModel::Continuous => {
            for (xi, fi) in x.iter_mut().zip(rate.iter()) {
                *xi += fi * dt;
            }
        }
        TimeModel::Discrete => x.copy_from_slice(rate),
    }
}

/// Integrates the nominal system (noise ignored) from `x0`.
pub fn simulate_deterministic(model: &SystemModel, x0: &[f64], sim: &SimConfig) -> Result<(StatePath, Trajectory)> {
    check_state(model, x0)?;
    let steps = sim.steps()?;
    let (nx, ny) = (model.state_dim, model.output_dim);
    let mut states = Vec::with_capacity((steps + 1) * nx);
    let mut outputs = vec![0.0; (steps + 1) * ny];
    let mut x = x0.to_vec();
    let mut rate = vec![0.0; nx];
    for step in 0..=steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        states.extend_from_slice(&x);
        (model.measurement)(&x, &mut outputs[step * ny..(step + 1) * ny]);
        if step < steps {
            nominal_step(model, &mut x, step as f64 * sim.dt, sim.dt, &mut rate);
        }
    }
    let traj = Trajectory::new(outputs, steps + 1, ny, sim.dt).map_err(|e| match e {
        Error::NonFinite { row, .. } => Error::BlowUp { step: row },
        other => other,
    })?;
    Ok((StatePath { states, state_dim: nx }, traj))
}

/// One Euler–Maruyama realization of the output trajectory.
///
/// Draw order per step: measurement noise for `y_t`, then the process
/// increment `w_t`. The initial state is drawn first.
pub fn simulate_stochastic(
    model: &SystemModel,
    init: &InitialSpec,
    sim: &SimConfig,
    rng: &mut StreamRng,
) -> Result<Trajectory> {
    let steps = sim.steps()?;
    let mut x = init.draw(rng);
    check_state(model, &x)?;
    let (nx, ny) = (model.state_dim, model.output_dim);
    let dt = sim.dt;
    let sqrt_dt = match model.time {
        TimeModel::Continuous => dt.sqrt(),
        TimeModel::Discrete => 1.0,
    };
    let mut outputs = vec![0.0; (steps + 1) * ny];
    let mut rate = vec![0.0; nx];
    let mut noise = vec![0.0; ny];
    let mut gain = model.diffusion.as_ref().map(|d| DMatrix::zeros(nx, d.noise_dim));
    let mut w = vec![0.0; model.diffusion.as_ref().map_or(0, |d| d.noise_dim)];
    let mut kick = vec![0.0; nx];

    for step in 0..=steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        let y = &mut outputs[step * ny..(step + 1) * ny];
        match &model.measurement_noise {
            MeasurementNoise::None => (model.measurement)(&x, y),
            MeasurementNoise::Additive(sampler) => {
                (model.measurement)(&x, y);
                sampler(rng, &mut noise);
                for (yi, e) in y.iter_mut().zip(&noise) {
                    *yi += e;
                }
            }
            MeasurementNoise::Combined(map) => map(&x, rng, y),
        }
        if step == steps {
            break;
        }
        let t = step as f64 * dt;
        if let (Some(diff), Some(g)) = (&model.diffusion, gain.as_mut()) {
            // The diffusion is evaluated at the pre-step state.
            (diff.map)(&x, t, g);
            for wi in w.iter_mut() {
                *wi = StandardNormal.sample(rng);
            }
            for (r, k) in kick.iter_mut().enumerate() {
                *k = (0..diff.noise_dim).map(|c| g[(r, c)] * w[c]).sum::<f64>() * sqrt_dt;
            }
            nominal_step(model, &mut x, t, dt, &mut rate);
            for (xi, k) in x.iter_mut().zip(&kick) {
                *xi += k;
            }
        } else {
            nominal_step(model, &mut x, t, dt, &mut rate);
        }
    }
    Trajectory::new(outputs, steps + 1, ny, dt).map_err(|e| match e {
        Error::NonFinite { row, .. } => Error::BlowUp { step: row },
        other => other,
    })
}

/// Simulates trajectory `index` of the batch rooted at `prefix`, using the
/// substream `(sim.seed, prefix ++ [index])`.
pub fn simulate_indexed(
    model: &SystemModel,
    init: &InitialSpec,
    sim: &SimConfig,
    prefix: &[u64],
    index: usize,
) -> Result<Trajectory> {
    let mut path = prefix.to_vec();
    path.push(index as u64);
    let mut rng = substream(sim.seed, &path);
    simulate_stochastic(model, init, sim, &mut rng)
}

/// `m` independent realizations; trajectory `i` uses substream `(sim.seed, [i])`.
pub fn sample_output_set(model: &SystemModel, init: &InitialSpec, m: usize, sim: &SimConfig) -> Result<SampleSet> {
    sample_output_set_at(model, init, m, sim, &[])
}

/// As [`sample_output_set`], with trajectory `i` on substream `prefix ++ [i]`.
pub fn sample_output_set_at(
    model: &SystemModel,
    init: &InitialSpec,
    m: usize,
    sim: &SimConfig,
    prefix: &[u64],
) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::invalid("sample size m must be at least 1"));
    }
    sim.steps()?;
    let results: Vec<Result<Trajectory>> = (0..m)
        .into_par_iter()
        .map(|i| simulate_indexed(model, init, sim, prefix, i))
        .collect();
    let trajectories = results.into_iter().collect::<Result<Vec<_>>>()?;
    SampleSet::new(trajectories, init.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn scalar_decay() -> SystemModel {
        SystemModel::new("decay", 1, 1, |x, _, f| f[0] = -x[0], |x, y| y[0] = x[0])
    }

    #[test]
    fn zero_drift_is_constant() {
        let m = SystemModel::new("static", 2, 2, |_, _, f| f.fill(0.0), |x, y| y.copy_from_slice(x));
        let sim = SimConfig::new(1.0, 0.25, 0).unwrap();
        let (_, traj) = simulate_deterministic(&m, &[1.0, -2.0], &sim).unwrap();
        assert_eq!(traj.steps(), 5);
        assert!(traj.rows().all(|r| r == [1.0, -2.0]));
    }

    #[test]
    fn single_euler_step() {
        let sim = SimConfig::new(0.1, 0.1, 0).unwrap();
        let (path, traj) = simulate_deterministic(&scalar_decay(), &[1.0], &sim).unwrap();
        assert_eq!(path.len(), 2);
        assert!((path.state(1)[0] - 0.9).abs() < 1e-15);
        assert!((traj.row(1)[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn blow_up_reports_step() {
        let m = SystemModel::new("boom", 1, 1, |x, _, f| f[0] = x[0] * x[0], |x, y| y[0] = x[0]);
        let sim = SimConfig::new(100.0, 1.0, 0).unwrap();
        match simulate_deterministic(&m, &[2.0], &sim) {
            Err(Error::BlowUp { step }) => assert!(step > 1 && step < 100),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn horizon_must_be_multiple_of_dt() {
        assert!(SimConfig::new(1.0, 0.3, 0).is_err());
        assert!(SimConfig::new(0.0, 0.1, 0).is_err());
        assert_eq!(SimConfig::new(2.0, 0.01, 0).unwrap().steps().unwrap(), 200);
        assert_eq!(SimConfig::new(1.0, 0.001, 0).unwrap().steps().unwrap(), 1000);
    }

    #[test]
    fn noise_free_stochastic_equals_deterministic() {
        let m = scalar_decay()
            .with_diffusion(1, |_, _, g| g[(0, 0)] = 0.0)
            .with_additive_noise(|_, e| e.fill(0.0));
        let sim = SimConfig::new(1.0, 0.01, 5).unwrap();
        let (_, det) = simulate_deterministic(&m, &[0.7], &sim).unwrap();
        let mut rng = substream(5, &[0]);
        let sto = simulate_stochastic(&m, &InitialSpec::Point(vec![0.7]), &sim, &mut rng).unwrap();
        assert_eq!(det, sto);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = scalar_decay()
            .with_diffusion(1, |_, _, g| g[(0, 0)] = 0.3)
            .with_gaussian_measurement_noise(0.1);
        let sim = SimConfig::new(1.0, 0.01, 9).unwrap();
        let init = InitialSpec::Point(vec![1.0]);
        let a = simulate_stochastic(&m, &init, &sim, &mut StreamRng::seed_from_u64(3)).unwrap();
        let b = simulate_stochastic(&m, &init, &sim, &mut StreamRng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dirac_zero_noise_batch_is_identical() {
        let sim = SimConfig::new(0.5, 0.1, 1).unwrap();
        let set = sample_output_set(&scalar_decay(), &InitialSpec::Point(vec![2.0]), 3, &sim).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.iter().all(|t| t == set.first()));
    }

    #[test]
    fn batch_member_equals_standalone() {
        let m = scalar_decay()
            .with_diffusion(1, |_, _, g| g[(0, 0)] = 0.5)
            .with_gaussian_measurement_noise(0.2);
        let sim = SimConfig::new(1.0, 0.05, 77).unwrap();
        let init = InitialSpec::Gaussian {
            mean: vec![1.0],
            std: vec![0.3],
        };
        let set = sample_output_set_at(&m, &init, 6, &sim, &[42]).unwrap();
        for i in [0usize, 3, 5] {
            let alone = simulate_indexed(&m, &init, &sim, &[42], i).unwrap();
            assert_eq!(&alone, &set.trajectories()[i]);
        }
        assert_ne!(set.trajectories()[0], set.trajectories()[1]);
    }

    #[test]
    fn discrete_transition() {
        // x_{t+1} = 2 x_t, y = x.
        let m = SystemModel::new("double", 1, 1, |x, _, f| f[0] = 2.0 * x[0], |x, y| y[0] = x[0]).discrete();
        let sim = SimConfig::new(3.0, 1.0, 0).unwrap();
        let (_, traj) = simulate_deterministic(&m, &[1.0], &sim).unwrap();
        assert_eq!(traj.values(), &[1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn state_dimension_checked() {
        let sim = SimConfig::new(1.0, 0.5, 0).unwrap();
        assert!(simulate_deterministic(&scalar_decay(), &[1.0, 2.0], &sim).is_err());
    }
}
