//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line for its
//! criterion and then asserts it. Run with
//! `cargo test -p distkit --test acceptance -- --nocapture`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distkit::dynamics::{sample_output_set_at, simulate_deterministic, InitialSpec, SimConfig, SystemModel};
use distkit::gramian::{empirical_gramian, line_angle, tangent_alignment};
use distkit::kernels::{sigma_meta_heuristic, KernelConfig};
use distkit::mmd::{
    analytic_threshold, concentration_probability, min_sample_bound, min_sample_size, mmd_squared_biased,
    two_sample_test, TestConfig,
};
use distkit::sweep::{grid_sweep, indistinguishability_class, GridSpec, KernelChoice, SweepConfig, SweepResult};
use distkit::systems::{
    discrete_linear_system, duffing_system, hamiltonian, hamiltonian_gradient, linear_drift_system, DuffingParams,
    LinearDriftParams,
};
use distkit::{SampleSet, Trajectory};

fn report(criterion: u32, pass: bool, detail: String) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Average ranks (ties share their mean rank).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// 1. Estimator equals a naive triple-loop transcription.

fn estimator_oracle(a: &SampleSet, b: &SampleSet, sigma: f64) -> f64 {
    let k = |x: &Trajectory, y: &Trajectory| {
        let mut s = 0.0;
        for t in 0..x.steps() {
            for i in 0..x.output_dim() {
                let d = x.row(t)[i] - y.row(t)[i];
                s += d * d;
            }
        }
        (-s / (2.0 * sigma * sigma)).exp()
    };
    let (m, n) = (a.len(), b.len());
    let mut saa = 0.0;
    for i in 0..m {
        for j in 0..m {
            saa += k(&a.trajectories()[i], &a.trajectories()[j]);
        }
    }
    let mut sbb = 0.0;
    for i in 0..n {
        for j in 0..n {
            sbb += k(&b.trajectories()[i], &b.trajectories()[j]);
        }
    }
    let mut sab = 0.0;
    for i in 0..m {
        for j in 0..n {
            sab += k(&a.trajectories()[i], &b.trajectories()[j]);
        }
    }
    let (m, n) = (m as f64, n as f64);
    saa / (m * m) + sbb / (n * n) - 2.0 * sab / (m * n)
}

#[test]
fn criterion_1_estimator_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=20);
        let steps = rng.random_range(1..=12);
        let ny = rng.random_range(1..=3);
        let shift: f64 = rng.random_range(0.0..1.5);
        let mut draw = |offset: f64| {
            let ts = (0..m)
                .map(|_| {
                    let v = (0..steps * ny).map(|_| offset + rng.random_range(-1.0..1.0)).collect();
                    Trajectory::new(v, steps, ny, 0.01).unwrap()
                })
                .collect();
            SampleSet::new(ts, "").unwrap()
        };
        let a = draw(0.0);
        let b = draw(shift);
        let sigma = (steps * ny) as f64 * 0.5;
        let sigma = sigma.sqrt() * rng.random_range(0.5..2.0);
        let got = mmd_squared_biased(&a, &b, &KernelConfig::gaussian(sigma).unwrap()).unwrap();
        let want = estimator_oracle(&a, &b, sigma);
        worst = worst.max(relative_error(got, want));
    }
    let pass = worst <= 1e-12;
    report(
        1,
        pass,
        format!("max relative error over 100 pairs = {worst:.3e} (tol 1e-12)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Type-I calibration of the bootstrap test.

fn discrete_pair(a: [f64; 4], noise: f64) -> SystemModel {
    let a = DMatrix::from_row_slice(2, 2, &a);
    let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let q = DMatrix::identity(2, 2) * noise;
    let r = DMatrix::identity(1, 1) * noise;
    discrete_linear_system(&a, &c, &q, &r).unwrap()
}

/// Runs `runs` independent bootstrap tests between sets from `x_a` and
/// `x_b`; returns the number of triggers.
fn repeated_tests(model: &SystemModel, x_a: &[f64], x_b: &[f64], m: usize, runs: usize, seed: u64) -> usize {
    let sim = SimConfig::new(10.0, 1.0, seed).unwrap();
    (0..runs)
        .filter(|&r| {
            let a = sample_output_set_at(model, &InitialSpec::Point(x_a.to_vec()), m, &sim, &[1, r as u64]).unwrap();
            let b = sample_output_set_at(model, &InitialSpec::Point(x_b.to_vec()), m, &sim, &[2, r as u64]).unwrap();
            let sigma = sigma_meta_heuristic([(&a, &b)]).unwrap();
            let kernel = KernelConfig::gaussian(sigma).unwrap();
            let tcfg = TestConfig::bootstrap(0.05, seed ^ (r as u64) << 8);
            two_sample_test(&a, &b, &kernel, &tcfg).unwrap().trigger
        })
        .count()
}

#[test]
fn criterion_2_type_one_calibration() {
    let model = discrete_pair([1.0, 1.0, 0.0, 1.0], 0.1);
    let triggers = repeated_tests(&model, &[0.0, 0.0], &[0.0, 0.0], 40, 200, 2);
    let rate = triggers as f64 / 200.0;
    let pass = rate <= 0.10;
    report(
        2,
        pass,
        format!("same-distribution trigger rate = {rate:.3} over 200 runs (limit 0.10)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Class recovery for the linear system with non-centered perturbation.

fn perpendicular_distance(x: &[f64], x_a: &[f64]) -> f64 {
    ((x[0] - x_a[0]) - (x[1] - x_a[1])).abs() / 2f64.sqrt()
}

#[test]
fn criterion_3_linear_class_recovery() {
    let model = linear_drift_system(&LinearDriftParams::default());
    let x_a = [1.5, 0.5];
    let grid = GridSpec::planar([0.0, -1.0], [3.0, 2.0], [20, 20]);
    let cfg = SweepConfig {
        m: 30,
        sim: SimConfig::new(2.0, 0.01, 3).unwrap(),
        kernel: KernelChoice::Auto,
        test: TestConfig::bootstrap(0.05, 3),
        sigma_cell_cap: distkit::sweep::DEFAULT_SIGMA_CELL_CAP,
    };
    let res = grid_sweep(&model, &x_a, &grid, &cfg).unwrap();
    assert!(res.records.iter().all(|r| r.is_ok()));

    let far: Vec<_> = res
        .records
        .iter()
        .filter(|r| perpendicular_distance(&r.state, &x_a) > 0.5)
        .collect();
    let far_rate = far.iter().filter(|r| r.triggered() == Some(true)).count() as f64 / far.len() as f64;
    let near: Vec<_> = res
        .records
        .iter()
        .filter(|r| perpendicular_distance(&r.state, &x_a) <= 0.1)
        .collect();
    let near_rate = near.iter().filter(|r| r.triggered() == Some(true)).count() as f64 / near.len() as f64;

    // Minimum-MMD cell in each x1 column.
    let ny = grid.axes[1].points;
    let cell_width = grid.axes[0].spacing();
    let locus: Vec<f64> = res
        .records
        .chunks(ny)
        .map(|col| {
            let best = col
                .iter()
                .min_by(|a, b| a.mmd_hat().unwrap().total_cmp(&b.mmd_hat().unwrap()))
                .unwrap();
            perpendicular_distance(&best.state, &x_a)
        })
        .collect();
    let locus_mean = locus.iter().sum::<f64>() / locus.len() as f64;

    let (pa, pb, pc) = (far_rate >= 0.95, near_rate <= 0.20, locus_mean < cell_width);
    report(
        3,
        pa && pb && pc,
        format!(
            "sigma = {:.4}; (a) far trigger rate {far_rate:.3} over {} cells (≥ 0.95); \
             (b) near-line trigger rate {near_rate:.3} over {} cells (≤ 0.20); \
             (c) min-MMD locus mean distance {locus_mean:.4} (< {cell_width:.4}); class size {}",
            res.sigma,
            far.len(),
            near.len(),
            indistinguishability_class(&res).len()
        ),
    );
    assert!(pa && pb && pc);
}

// ---------------------------------------------------------------------------
// 4 & 5. Duffing level-set structure and its deformation by process noise.

const DUFFING_REFERENCE: [f64; 2] = [1.0, 1.0];

fn duffing_sweep(params: DuffingParams, seed: u64) -> SweepResult {
    let model = duffing_system(&params);
    let grid = GridSpec::planar([-2.0, -2.0], [2.0, 2.0], [30, 30]);
    let cfg = SweepConfig {
        m: 50,
        sim: SimConfig::new(1.0, 0.001, seed).unwrap(),
        kernel: KernelChoice::Auto,
        test: TestConfig::bootstrap(0.05, seed),
        sigma_cell_cap: distkit::sweep::DEFAULT_SIGMA_CELL_CAP,
    };
    grid_sweep(&model, &DUFFING_REFERENCE, &grid, &cfg).unwrap()
}

fn low_noise_sweep() -> &'static SweepResult {
    static CELL: OnceLock<SweepResult> = OnceLock::new();
    CELL.get_or_init(|| duffing_sweep(DuffingParams::low_noise(), 4))
}

fn h_discrepancy(x: &[f64]) -> f64 {
    (hamiltonian(x) - hamiltonian(&DUFFING_REFERENCE)).abs()
}

fn class_mean_discrepancy(res: &SweepResult) -> Option<f64> {
    let class = indistinguishability_class(res);
    (!class.is_empty()).then(|| class.iter().map(|x| h_discrepancy(x)).sum::<f64>() / class.len() as f64)
}

#[test]
fn criterion_4_duffing_level_sets() {
    let res = low_noise_sweep();
    let ok: Vec<_> = res.records.iter().filter(|r| r.is_ok()).collect();
    let mmd: Vec<f64> = ok.iter().map(|r| r.mmd_hat().unwrap()).collect();
    let dh: Vec<f64> = ok.iter().map(|r| h_discrepancy(&r.state)).collect();
    let rho = spearman(&mmd, &dh);
    let class_mean = class_mean_discrepancy(res);
    let mut trig: Vec<f64> = ok
        .iter()
        .filter(|r| r.triggered() == Some(true))
        .map(|r| h_discrepancy(&r.state))
        .collect();
    let trig_median = median(&mut trig);
    let pass = rho >= 0.8 && class_mean.is_some_and(|c| c < trig_median);
    report(
        4,
        pass,
        format!(
            "sigma = {:.4}; Spearman(mmd, |Δh|) = {rho:.4} (≥ 0.8); class mean |Δh| = {class_mean:?} \
             vs triggering median {trig_median:.4}; class size {}",
            res.sigma,
            indistinguishability_class(res).len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_process_noise_deforms_class() {
    let low = class_mean_discrepancy(low_noise_sweep());
    let high_res = duffing_sweep(DuffingParams::high_noise(), 5);
    let high = class_mean_discrepancy(&high_res);
    let pass = matches!((low, high), (Some(l), Some(h)) if h > l);
    report(
        5,
        pass,
        format!(
            "class mean |Δh|: b = 0.05 → {low:?}, b = 0.5 → {high:?} (high-noise class size {})",
            indistinguishability_class(&high_res).len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Gramian null direction is tangent to the class.

#[test]
fn criterion_6_gramian_tangency() {
    let duffing = duffing_system(&DuffingParams::low_noise());
    let sim = SimConfig::new(1.0, 0.001, 0).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for x0 in [[1.0, 1.0], [0.1, 0.9]] {
        let g = empirical_gramian(&duffing, &x0, 0.1, &sim).unwrap();
        let dir = g.null_direction.expect("simple smallest eigenvalue");
        let angle = tangent_alignment(&dir, &x0, hamiltonian_gradient).unwrap();
        pass &= angle < 10.0;
        lines.push(format!("Duffing {x0:?}: {angle:.3}° (< 10°)"));
    }
    let linear = linear_drift_system(&LinearDriftParams::default());
    let g = empirical_gramian(&linear, &[1.5, 0.5], 0.1, &SimConfig::new(2.0, 0.01, 0).unwrap()).unwrap();
    let angle = line_angle(g.null_direction.as_ref().unwrap(), &[1.0, 1.0]);
    let ratio = g.eigenvalue_ratio();
    pass &= angle < 1.0 && ratio <= 1e-6;
    lines.push(format!(
        "linear: {angle:.2e}° (< 1°), eigenvalue ratio {ratio:.2e} (≤ 1e-6)"
    ));
    report(6, pass, lines.join("; "));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Linear systems: noise preserves (in)distinguishability.

#[test]
fn criterion_7_linear_theorem_check() {
    let unobservable = discrete_pair([1.0, 0.0, 0.0, 1.0], 0.1);
    let observable = discrete_pair([1.0, 1.0, 0.0, 1.0], 0.1);
    let (x_a, x_b) = ([0.0, 0.0], [0.0, 1.0]);
    let t_unobs = repeated_tests(&unobservable, &x_a, &x_b, 50, 50, 71);
    let t_obs = repeated_tests(&observable, &x_a, &x_b, 50, 50, 72);
    let pass = t_unobs <= 5 && t_obs >= 45;
    report(
        7,
        pass,
        format!("unobservable pair triggered {t_unobs}/50 (≤ 5); observable pair triggered {t_obs}/50 (≥ 45)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Closed forms against direct evaluation.

#[test]
fn criterion_8_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..50 {
        let m: usize = rng.random_range(1..=5000);
        let n: usize = rng.random_range(1..=5000);
        let b: f64 = rng.random_range(0.1..4.0);
        let alpha: f64 = rng.random_range(0.001..0.999);
        let eps: f64 = rng.random_range(0.0..0.5);
        let z: f64 = rng.random_range(0.01..2.0);
        let beta: f64 = rng.random_range(0.001..0.999);

        let kappa = (2.0 * b / m as f64).sqrt() * (1.0 + (2.0 * (1.0 / alpha).ln()).sqrt());
        worst = worst.max(relative_error(analytic_threshold(m, b, alpha).unwrap(), kappa));

        let (mf, nf) = (m as f64, n as f64);
        let p = 2.0 * (-(eps * eps) / (2.0 * b) * (mf * nf / (mf + nf))).exp();
        worst = worst.max(relative_error(concentration_probability(m, n, b, eps).unwrap(), p));

        let root = 4.0 + 2f64.sqrt() + 2.0 * ((1.0 / beta).ln().sqrt() + (2.0 / beta).ln().sqrt());
        let bound = b / (z * z) * root * root;
        worst = worst.max(relative_error(min_sample_bound(z, b, beta).unwrap(), bound));
        let size = min_sample_size(z, b, beta).unwrap();
        monotone &= (size as f64) > bound && ((size - 1) as f64) <= bound;

        monotone &= analytic_threshold(m + 1, b, alpha).unwrap() < analytic_threshold(m, b, alpha).unwrap();
        monotone &= min_sample_bound(z / 2.0, b, beta).unwrap() == 4.0 * min_sample_bound(z, b, beta).unwrap();
    }
    let pass = worst <= 1e-12 && monotone;
    report(
        8,
        pass,
        format!("max relative error {worst:.3e} (tol 1e-12); monotonicity/scaling exact: {monotone}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Hamiltonian conservation of the nominal Duffing flow.

#[test]
fn criterion_9_duffing_conservation() {
    let model = duffing_system(&DuffingParams::low_noise()).nominal();
    let sim = SimConfig::new(1.0, 1e-4, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: (f64, [f64; 2]) = (0.0, [0.0; 2]);
    for _ in 0..20 {
        let x0 = [rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0)];
        let (path, _) = simulate_deterministic(&model, &x0, &sim).unwrap();
        let h0 = hamiltonian(&x0);
        let drift = (0..path.len())
            .map(|t| (hamiltonian(path.state(t)) - h0).abs())
            .fold(0.0, f64::max);
        if drift > worst.0 {
            worst = (drift, x0);
        }
    }
    let pass = worst.0 < 1e-3;
    report(
        9,
        pass,
        format!("max |h(x_t) − h(x0)| = {:.3e} at x0 = {:?} (< 1e-3)", worst.0, worst.1),
    );
    assert!(pass);
}
