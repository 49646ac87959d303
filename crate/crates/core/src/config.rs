//! Experiment configuration files (TOML). Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! kind = "linear_drift"        # or "duffing", "discrete_linear"
//!
//! [sim]
//! horizon = 2.0
//! dt = 0.01
//!
//! [initial]
//! a = [1.5, 0.5]
//! b = { mean = [2.5, 1.5], std = [0.1, 0.1] }
//!
//! [samples]
//! m = 30
//! n = 30
//!
//! [kernel]
//! sigma = "auto"               # or a positive number
//!
//! [test]
//! alpha = 0.05
//! method = "bootstrap"         # or "analytic"
//! n_permutations = 1000
//!
//! [grid]
//! axes = [{ dim = 0, lower = 0.0, upper = 3.0, points = 20 },
//!         { dim = 1, lower = -1.0, upper = 2.0, points = 20 }]
//! base = [0.0, 0.0]
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{InitialSpec, SimConfig, SystemModel};
use crate::error::{Error, Result};
use crate::gramian::DEFAULT_EPSILON;
use crate::kernels::KernelConfig;
use crate::mmd::{TestConfig, ThresholdMethod, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use crate::sweep::{GridSpec, KernelChoice, SweepConfig, DEFAULT_SIGMA_CELL_CAP};
use crate::systems::{discrete_linear_system, duffing_system, linear_drift_system, DuffingParams, LinearDriftParams};

pub const MODEL_NAMES: [&str; 3] = ["linear_drift", "duffing", "discrete_linear"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    LinearDrift(LinearDriftParams),
    Duffing(DuffingParams),
    DiscreteLinear(DiscreteLinearParams),
}

/// Matrices are given row by row; `q` and `r` default to zero noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteLinearParams {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "matrix {name} must be a non-empty rectangular list of rows"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::LinearDrift(_) => "linear_drift",
            ModelConfig::Duffing(_) => "duffing",
            ModelConfig::DiscreteLinear(_) => "discrete_linear",
        }
    }

    pub fn build(&self) -> Result<SystemModel> {
        match self {
            ModelConfig::LinearDrift(p) => Ok(linear_drift_system(p)),
            ModelConfig::Duffing(p) => Ok(duffing_system(p)),
            ModelConfig::DiscreteLinear(p) => {
                let a = matrix("a", &p.a)?;
                let c = matrix("c", &p.c)?;
                let q = match &p.q {
                    Some(q) => matrix("q", q)?,
                    None => DMatrix::zeros(a.nrows(), 1),
                };
                let r = match &p.r {
                    Some(r) => matrix("r", r)?,
                    None => DMatrix::zeros(c.nrows(), 1),
                };
                discrete_linear_system(&a, &c, &q, &r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Point(Vec<f64>),
    Gaussian(GaussianInit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianInit {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InitialConfig {
    pub fn spec(&self) -> InitialSpec {
        match self {
            InitialConfig::Point(x) => InitialSpec::Point(x.clone()),
            InitialConfig::Gaussian(g) => InitialSpec::Gaussian {
                mean: g.mean.clone(),
                std: g.std.clone(),
            },
        }
    }

    /// A representative state (the point, or the mean).
    pub fn center(&self) -> &[f64] {
        match self {
            InitialConfig::Point(x) => x,
            InitialConfig::Gaussian(g) => &g.mean,
        }
    }

    fn check(&self, name: &str, dim: usize) -> Result<()> {
        let ok = match self {
            InitialConfig::Point(x) => x.len() == dim,
            InitialConfig::Gaussian(g) => g.mean.len() == dim && g.std.len() == dim && g.std.iter().all(|s| *s >= 0.0),
        };
        if ok && self.center().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "initial.{name} must be a finite state of dimension {dim}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub a: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<InitialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSection {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl Default for SamplesSection {
    fn default() -> Self {
        Self { m: 30, n: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSetting {
    Fixed(f64),
    Auto(AutoTag),
}

impl Default for SigmaSetting {
    fn default() -> Self {
        SigmaSetting::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default)]
    pub sigma: SigmaSetting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSection {
    pub alpha: f64,
    pub method: ThresholdMethod,
    pub n_permutations: usize,
}

impl Default for TestSection {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            method: ThresholdMethod::Bootstrap,
            n_permutations: DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub axes: Vec<crate::sweep::Axis>,
    pub base: Vec<f64>,
    #[serde(default = "default_cap")]
    pub sigma_cell_cap: usize,
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            axes: self.axes.clone(),
            base: self.base.clone(),
        }
    }
}

fn default_cap() -> usize {
    DEFAULT_SIGMA_CELL_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GramianSection {
    pub epsilon: f64,
}

impl Default for GramianSection {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub sim: SimSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub samples: SamplesSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub test: TestSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub gramian: GramianSection,
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        self.sim_config()?;
        self.initial.a.check("a", model.state_dim)?;
        if let Some(b) = &self.initial.b {
            b.check("b", model.state_dim)?;
        }
        if self.samples.m == 0 || self.samples.n == Some(0) {
            return Err(Error::Config("sample sizes must be at least 1".into()));
        }
        self.test_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let SigmaSetting::Fixed(s) = self.kernel.sigma {
            KernelConfig::gaussian(s).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(grid) = &self.grid {
            grid.spec()
                .validate(model.state_dim)
                .map_err(|e| Error::Config(format!("grid: {e}")))?;
        }
        if !(self.gramian.epsilon > 0.0) {
            return Err(Error::Config("gramian.epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        SimConfig::new(self.sim.horizon, self.sim.dt, self.seed).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n(&self) -> usize {
        self.samples.n.unwrap_or(self.samples.m)
    }

    pub fn test_config(&self) -> TestConfig {
        TestConfig {
            alpha: self.test.alpha,
            method: self.test.method,
            n_permutations: self.test.n_permutations,
            seed: self.seed,
        }
    }

    pub fn kernel_choice(&self) -> Result<KernelChoice> {
        Ok(match self.kernel.sigma {
            SigmaSetting::Fixed(s) => KernelChoice::Fixed(KernelConfig::gaussian(s)?),
            SigmaSetting::Auto(_) => KernelChoice::Auto,
        })
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            m: self.samples.m,
            sim: self.sim_config()?,
            kernel: self.kernel_choice()?,
            test: self.test_config(),
            sigma_cell_cap: self.grid.as_ref().map_or(DEFAULT_SIGMA_CELL_CAP, |g| g.sigma_cell_cap),
        })
    }
}
