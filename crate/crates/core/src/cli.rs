//! Subcommand implementations behind the `distkit` binary.
//!
//! Each command returns its structured result so it can be driven from
//! tests; the binary only handles argument parsing and printing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, InitialConfig, SigmaSetting};
use crate::dynamics::sample_output_set_at;
use crate::error::{Error, Result};
use crate::gramian::{empirical_gramian, GramianResult};
use crate::io::{load_trajectories_csv, save_trajectories_csv};
use crate::kernels::{sigma_meta_heuristic, KernelConfig};
use crate::mmd::{two_sample_test, TestConfig, TestResult};
use crate::rng::domain;
use crate::sweep::{grid_sigma, grid_sweep, indistinguishability_class, reference_set, SweepResult};
use crate::trajectory::SampleSet;

pub const SET_A_FILE: &str = "set_a.csv";
pub const SET_B_FILE: &str = "set_b.csv";
pub const SWEEP_HEADER_FILE: &str = "sweep_header.json";
pub const SWEEP_TABLE_FILE: &str = "sweep.csv";
pub const CLASS_FILE: &str = "class.csv";
pub const GRAMIAN_FILE: &str = "gramian.json";
pub const TEST_FILE: &str = "test_result.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn point_state<'a>(init: &'a InitialConfig, what: &str) -> Result<&'a [f64]> {
    match init {
        InitialConfig::Point(x) => Ok(x),
        InitialConfig::Gaussian(_) => Err(Error::Config(format!("{what} needs a point initial state"))),
    }
}

/// Simulates set A (and set B when configured) and writes them as CSV.
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let model = cfg.model.build()?;
    let sim = cfg.sim_config()?;
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    let a = sample_output_set_at(&model, &cfg.initial.a.spec(), cfg.samples.m, &sim, &[domain::SET_A])?;
    let path = out_dir.join(SET_A_FILE);
    save_trajectories_csv(&a, &path)?;
    written.push(path);
    if let Some(b) = &cfg.initial.b {
        let set = sample_output_set_at(&model, &b.spec(), cfg.n(), &sim, &[domain::SET_B])?;
        let path = out_dir.join(SET_B_FILE);
        save_trajectories_csv(&set, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub set_a: String,
    pub set_b: String,
    pub sigma: f64,
    pub sigma_auto: bool,
    #[serde(flatten)]
    pub result: TestResult,
}

impl TestReport {
    pub fn summary(&self) -> String {
        let ratio = self.result.ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        format!(
            "MMD = {:.6}  kappa = {:.6}  ratio = {ratio}  ({:?}, alpha = {}, m = n = {}, sigma = {:.6})\n{}",
            self.result.mmd_hat,
            self.result.kappa,
            self.result.method,
            self.result.alpha,
            self.result.m,
            self.sigma,
            if self.result.trigger {
                "distinguishable: H0 rejected"
            } else {
                "not distinguishable at this level: H0 retained"
            }
        )
    }
}

/// Two-sample test between two trajectory files. Without a config the
/// defaults apply (bootstrap, alpha = 0.05, automatic sigma).
pub fn cmd_test(path_a: &Path, path_b: &Path, cfg: Option<&ExperimentConfig>, seed: Option<u64>) -> Result<TestReport> {
    let a = load_trajectories_csv(path_a)?;
    let b = load_trajectories_csv(path_b)?;
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch { m: a.len(), n: b.len() });
    }
    let mut tcfg = cfg.map_or_else(TestConfig::default, ExperimentConfig::test_config);
    if let Some(s) = seed {
        tcfg.seed = s;
    }
    let sigma_setting = cfg.map_or_else(SigmaSetting::default, |c| c.kernel.sigma);
    let (kernel, sigma_auto) = match sigma_setting {
        SigmaSetting::Fixed(s) => (KernelConfig::gaussian(s)?, false),
        SigmaSetting::Auto(_) => (sigma_for_pair(&a, &b)?, true),
    };
    let result = two_sample_test(&a, &b, &kernel, &tcfg)?;
    Ok(TestReport {
        set_a: path_a.display().to_string(),
        set_b: path_b.display().to_string(),
        sigma: kernel.sigma,
        sigma_auto,
        result,
    })
}

fn sigma_for_pair(a: &SampleSet, b: &SampleSet) -> Result<KernelConfig> {
    match sigma_meta_heuristic([(a, b)]) {
        Ok(s) => KernelConfig::gaussian(s),
        // All trajectories identical: any width gives MMD = 0.
        Err(Error::DegenerateDistances) => KernelConfig::gaussian(1.0),
        Err(e) => Err(e),
    }
}

/// Runs the configured grid sweep and writes the header, table and class files.
pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepResult> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [grid] section".into()))?;
    let model = cfg.model.build()?;
    let x_a = point_state(&cfg.initial.a, "sweep reference")?;
    let result = grid_sweep(&model, x_a, &grid.spec(), &cfg.sweep_config()?)?;
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(SWEEP_HEADER_FILE), &result.header(cfg.model.name()))?;
    result.write_csv(fs::File::create(out_dir.join(SWEEP_TABLE_FILE))?)?;

    let mut class = csv::Writer::from_path(out_dir.join(CLASS_FILE)).map_err(|e| Error::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    let dims = model.state_dim;
    let header: Vec<String> = (1..=dims).map(|k| format!("x{k}")).collect();
    let rows = std::iter::once(header).chain(
        indistinguishability_class(&result)
            .into_iter()
            .map(|p| p.iter().map(|v| crate::io::format_float(*v)).collect()),
    );
    for row in rows {
        class.write_record(&row).map_err(|e| Error::Csv {
            line: 0,
            message: e.to_string(),
        })?;
    }
    class.flush()?;
    Ok(result)
}

/// Empirical Gramian at `initial.a`, written as JSON.
pub fn cmd_gramian(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<GramianResult> {
    let model = cfg.model.build()?;
    let x0 = cfg.initial.a.center();
    let result = empirical_gramian(&model, x0, cfg.gramian.epsilon, &cfg.sim_config()?)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join(GRAMIAN_FILE), &result)?;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaReport {
    pub sigma: f64,
    pub pairs: usize,
}

/// Meta-heuristic width from explicit file pairs `A1 B1 A2 B2 ...`.
pub fn cmd_sigma_files(paths: &[PathBuf]) -> Result<SigmaReport> {
    if paths.is_empty() || !paths.len().is_multiple_of(2) {
        return Err(Error::invalid(
            "sigma expects an even, non-zero number of CSV files (A1 B1 A2 B2 ...)",
        ));
    }
    let sets = paths
        .iter()
        .map(|p| load_trajectories_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(&SampleSet, &SampleSet)> = sets.chunks_exact(2).map(|c| (&c[0], &c[1])).collect();
    Ok(SigmaReport {
        sigma: sigma_meta_heuristic(pairs.iter().copied())?,
        pairs: pairs.len(),
    })
}

/// Meta-heuristic width from a config: over the grid pairs when a grid is
/// present (exactly the width an automatic sweep would use), otherwise over
/// the single simulated pair (A, B).
pub fn cmd_sigma_config(cfg: &ExperimentConfig) -> Result<SigmaReport> {
    let model = cfg.model.build()?;
    if let Some(grid) = &cfg.grid {
        let x_a = point_state(&cfg.initial.a, "grid sigma reference")?;
        let scfg = cfg.sweep_config()?;
        let spec = grid.spec();
        let reference = reference_set(&model, x_a, &scfg)?;
        return Ok(SigmaReport {
            sigma: grid_sigma(&model, &reference, &spec, &scfg)?,
            pairs: spec.cell_count().min(scfg.sigma_cell_cap),
        });
    }
    let b = cfg
        .initial
        .b
        .as_ref()
        .ok_or_else(|| Error::Config("sigma needs either a [grid] section or initial.b".into()))?;
    let sim = cfg.sim_config()?;
    let a = sample_output_set_at(&model, &cfg.initial.a.spec(), cfg.samples.m, &sim, &[domain::SET_A])?;
    let b = sample_output_set_at(&model, &b.spec(), cfg.n(), &sim, &[domain::SET_B])?;
    Ok(SigmaReport {
        sigma: sigma_meta_heuristic([(&a, &b)])?,
        pairs: 1,
    })
}

pub fn write_test_report(report: &TestReport, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(TEST_FILE), report)
}
