//! Bound-verification suites. Each suite sweeps one family of invariants and
//! returns a row per check with the measured value next to its bounds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use qrbf_core::coherent;
use qrbf_core::compact::{self, CompactOracleConfig};
use qrbf_core::interpolation::{self, AssembleOptions, DataSet};
use qrbf_core::kernels::{Kernel, Wendland};
use qrbf_core::qcore::{self, DensityMatrix, PureState, C64};
use qrbf_core::qinvert::{self, InversionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::report::BoundRow;
use crate::{HarnessError, Result, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Truncation,
    Gram,
    Dme,
    Inversion,
    Perturbation,
    CompactOracle,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Truncation, Suite::Gram, Suite::Dme, Suite::Inversion, Suite::Perturbation, Suite::CompactOracle];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Truncation => "truncation",
            Suite::Gram => "gram",
            Suite::Dme => "dme",
            Suite::Inversion => "inversion",
            Suite::Perturbation => "perturbation",
            Suite::CompactOracle => "compact-oracle",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl std::str::FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| HarnessError::UnknownSuite(s.into()))
    }
}

/// Runs `suite` and stamps every row with the seed and configuration hash.
pub fn verify_bounds(suite: Suite, seed: u64, config_hash: &str) -> Result<Vec<BoundRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite.stream());
    let mut rows = match suite {
        Suite::Truncation => truncation_suite()?,
        Suite::Gram => gram_suite(&mut rng)?,
        Suite::Dme => dme_suite(&mut rng)?,
        Suite::Inversion => inversion_suite(&mut rng)?,
        Suite::Perturbation => perturbation_suite(&mut rng)?,
        Suite::CompactOracle => compact_suite(&mut rng)?,
    };
    for row in &mut rows {
        row.seed = seed;
        row.config_hash = config_hash.into();
        row.suite = suite.name().into();
    }
    Ok(rows)
}

pub fn all_pass(rows: &[BoundRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

/// Sites of suite datasets are at least this fraction of the box apart.
const SUITE_SEPARATION: f64 = 0.02;

/// `m` sites uniform in `[lo, hi]^d`, pairwise at least `0.02 (hi - lo)`
/// apart, with uniform values in `[-1, 1]`.
pub fn random_dataset<R: Rng>(rng: &mut R, m: usize, d: usize, lo: f64, hi: f64) -> Result<DataSet> {
    let min_sep = SUITE_SEPARATION * (hi - lo);
    let mut sites: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while sites.len() < m {
        attempts += 1;
        if attempts > 1000 * m {
            return Err(HarnessError::Placement { m, attempts });
        }
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..hi)).collect();
        if sites.iter().all(|s| interpolation::distance(s, &p) >= min_sep) {
            sites.push(p);
        }
    }
    let values = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(DataSet::new(sites, values)?)
}

/// Random orthogonal conjugate of `diag(eigenvalues)`.
pub fn random_spd<R: Rng>(rng: &mut R, eigenvalues: &[f64]) -> DMatrix<f64> {
    let m = eigenvalues.len();
    let g = DMatrix::from_fn(m, m, |_, _| rng.gen::<f64>() - 0.5);
    let q = g.qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn random_vector<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_state<R: Rng>(rng: &mut R, n: usize) -> Result<PureState> {
    let amps = DVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    PureState::normalized(amps).stage("random state")
}

// ---------------------------------------------------------------- truncation

pub const TRUNCATION_RATIOS: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

fn truncation_suite() -> Result<Vec<BoundRow>> {
    let orders: Vec<usize> = (2..=30).collect();
    let rows = coherent::truncation_sweep(&TRUNCATION_RATIOS, &orders).stage("truncation sweep")?;
    Ok(rows
        .iter()
        .map(|r| BoundRow::at_most(format!("ratio={} order={}", r.ratio, r.order), r.measured, r.bound))
        .collect())
}

// ---------------------------------------------------------------------- gram

pub const GRAM_DATASETS: usize = 50;
pub const SUPERPOSITION_CASES: usize = 20;
pub const GERSHGORIN_DATASETS: usize = 100;

fn gram_suite(rng: &mut ChaCha8Rng) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for k in 0..GRAM_DATASETS {
        let m = rng.gen_range(1..=10);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.5..1.5);
        let order = rng.gen_range(2..=12);
        let ds = random_dataset(rng, m, d, 0.0, 1.0)?;
        let g = coherent::gram_coherent(&ds, sigma, order).stage("coherent gram")?;
        let case = format!("dataset {k} m={m} d={d} order={order}");
        rows.push(BoundRow::at_most(format!("{case} frobenius"), g.frobenius_error, g.bound()));
        rows.push(BoundRow::at_most(format!("{case} entrywise"), g.max_inner_error, g.bound()));
    }
    for k in 0..SUPERPOSITION_CASES {
        let m = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=2);
        let order = rng.gen_range(1..=6);
        let sigma = rng.gen_range(0.5..1.5);
        let ds = random_dataset(rng, m, d, 0.0, 1.0)?;
        let r = coherent::superposition_gram_check(&ds, sigma, order, coherent::DEFAULT_SUPERPOSITION_CAP)
            .stage("superposition check")?;
        let case = format!("superposition {k} m={m} d={d} order={order}");
        rows.push(BoundRow::at_most(format!("{case} real"), r.max_deviation, 1e-12));
        rows.push(BoundRow::at_most(format!("{case} imaginary"), r.max_imaginary, 1e-12));
    }
    for k in 0..GERSHGORIN_DATASETS {
        let m = rng.gen_range(1..=20);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.05..2.0);
        let ds = random_dataset(rng, m, d, -1.0, 1.0)?;
        let a = interpolation::assemble(&ds, &Kernel::gaussian(sigma).stage("kernel")?, AssembleOptions::normalized())?;
        let lambda_max = interpolation::spectrum(&a).max;
        rows.push(BoundRow::at_most(format!("gershgorin {k} m={m} d={d}"), lambda_max, 1.0 + 1e-12));
    }
    Ok(rows)
}

// ----------------------------------------------------------------------- dme

pub const DME_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
pub const DME_PAIRS: usize = 3;
pub const DME_STEPS: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];
pub const DME_SINGLE_STEPS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Trace-norm errors of single steps of length `dts`.
pub fn single_step_errors(a: &DensityMatrix, rho: &DensityMatrix, dts: &[f64]) -> Result<Vec<f64>> {
    dts.iter()
        .map(|&dt| {
            let step = qcore::dme_step(a, rho, dt).stage("dme step")?;
            let exact = qcore::exact_conjugation(a.matrix(), rho, dt).stage("exact conjugation")?;
            Ok(qcore::trace_norm(&(step.matrix() - exact.matrix())))
        })
        .collect()
}

fn dme_suite(rng: &mut ChaCha8Rng) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for &t in &DME_TIMES {
        for k in 0..DME_PAIRS {
            let a = qcore::random_density(4, rng);
            let rho = qcore::random_density(4, rng);
            let scaling = qcore::dme_scaling(&a, &rho, t, &DME_STEPS).stage("dme scaling")?;
            let l: Vec<f64> = scaling.iter().map(|r| r.l as f64).collect();
            let err: Vec<f64> = scaling.iter().map(|r| r.trace_error).collect();
            rows.push(BoundRow::within(format!("t={t} pair {k} slope in steps"), qcore::loglog_slope(&l, &err), -1.2, -0.8));
        }
    }
    for k in 0..DME_PAIRS {
        let a = qcore::random_density(4, rng);
        let rho = qcore::random_density(4, rng);
        let err = single_step_errors(&a, &rho, &DME_SINGLE_STEPS)?;
        rows.push(BoundRow::within(
            format!("pair {k} single-step slope in dt"),
            qcore::loglog_slope(&DME_SINGLE_STEPS, &err),
            1.8,
            2.2,
        ));
    }
    Ok(rows)
}

// ----------------------------------------------------------------- inversion

pub const INVERSION_SYSTEMS: usize = 100;
pub const ON_GRID_CASES: usize = 20;
pub const GENERIC_INSTANCES: usize = 40;
pub const GENERIC_EXPONENTS: std::ops::RangeInclusive<u32> = 1..=9;
pub const SWAP_SEEDS: u64 = 100;
pub const SWAP_SHOTS: u64 = 1_000_000;

/// Probability of reading `0` on the control of an explicitly simulated
/// swap-test circuit: Hadamard, controlled swap, Hadamard.
pub fn swap_circuit(u: &PureState, v: &PureState) -> f64 {
    let uv = u.tensor(v);
    let vu = v.tensor(u);
    let sum = uv.amplitudes() + vu.amplitudes();
    sum.norm_squared() / 4.0
}

/// Clock width and evolution time for step `j` of the generic-spectrum sweep.
pub fn generic_schedule(j: u32) -> (u32, f64) {
    ((j + 1).min(qinvert::DEFAULT_CLOCK_CAP), 2.0 * PI * f64::from(1u32 << j))
}

/// Mean quantized-versus-ideal deviation over random systems with spectra in
/// `[0.25, 1]`, one entry per exponent of the schedule.
pub fn generic_deviation_means<R: Rng>(rng: &mut R, instances: usize) -> Result<Vec<(f64, f64)>> {
    let systems: Vec<(DMatrix<f64>, Vec<f64>)> = (0..instances)
        .map(|_| {
            let ev: Vec<f64> = (0..4).map(|_| rng.gen_range(0.25..1.0)).collect();
            (random_spd(rng, &ev), random_vector(rng, 4))
        })
        .collect();
    GENERIC_EXPONENTS
        .map(|j| {
            let (bits, t0) = generic_schedule(j);
            let cfg = InversionConfig::quantized(t0, bits);
            let mut total = 0.0;
            for (a, y) in &systems {
                let r = qinvert::invert_quantized(a, y, &cfg).stage("quantized inversion")?;
                total += r.deviation_from_ideal.unwrap_or(f64::NAN);
            }
            Ok((t0, total / instances as f64))
        })
        .collect()
}

fn inversion_suite(rng: &mut ChaCha8Rng) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for k in 0..INVERSION_SYSTEMS {
        let m = rng.gen_range(1..=16);
        let kappa: f64 = 10f64.powf(rng.gen_range(0.0..3.0));
        let mut ev: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0 / kappa..1.0)).collect();
        ev[0] = 1.0 / kappa;
        if m > 1 {
            ev[1] = 1.0;
        }
        let a = random_spd(rng, &ev);
        let y = random_vector(rng, m);
        let r = qinvert::invert_ideal(&a, &y, &InversionConfig::ideal()).stage("ideal inversion")?;
        let c = interpolation::solve(&interpolation::InterpMatrix::from_dense(a.clone(), false), &y)?;
        let spectrum = interpolation::symmetric_eigenvalues(&a);
        let kappa_measured = spectrum[m - 1] / spectrum[0];
        let case = format!("system {k} m={m}");
        rows.push(BoundRow::at_least(format!("{case} fidelity"), r.fidelity_vs_classical, 1.0 - 1e-10));
        rows.push(BoundRow::at_most(format!("{case} norm relative error"), (r.c_norm_est - c.norm).abs() / c.norm, 1e-9));
        rows.push(BoundRow::at_least(
            format!("{case} post-selection"),
            r.post_select_prob,
            1.0 / (kappa_measured * kappa_measured) * (1.0 - 1e-12),
        ));
    }

    // Spectra on the clock grid: `lambda = 2 pi k / t0` for integer `k`.
    for k in 0..ON_GRID_CASES {
        let bits = rng.gen_range(3..=8);
        let t0 = 2.0 * PI * f64::from(1u32 << (bits - 2));
        let m = rng.gen_range(1..=4);
        let ev: Vec<f64> = (0..m).map(|_| 2.0 * PI * rng.gen_range(1..1u32 << bits) as f64 / t0).collect();
        let a = random_spd(rng, &ev);
        let y = random_vector(rng, m);
        let r = qinvert::invert_quantized(&a, &y, &InversionConfig::quantized(t0, bits)).stage("quantized inversion")?;
        rows.push(BoundRow::at_most(
            format!("on-grid {k} bits={bits} m={m}"),
            r.deviation_from_ideal.unwrap_or(f64::NAN),
            1e-10,
        ));
    }

    let means = generic_deviation_means(rng, GENERIC_INSTANCES)?;
    let t0: Vec<f64> = means.iter().map(|p| p.0).collect();
    let dev: Vec<f64> = means.iter().map(|p| p.1).collect();
    rows.push(BoundRow::within("generic spectra slope in t0", qcore::loglog_slope(&t0, &dev), -1.3, -0.7));

    let mut covered = 0;
    for s in 0..SWAP_SEEDS {
        // One-dimensional pairs give p = 1 up to roundoff, where the binomial
        // half-width degenerates to zero.
        let n = rng.gen_range(2..=4);
        let u = random_state(rng, n)?;
        let v = random_state(rng, n)?;
        let p = qinvert::swap_test(&u, &v).stage("swap test")?;
        let circuit = swap_circuit(&u, &v);
        let overlap = u.inner(&v).stage("overlap")?.norm_sqr().min(1.0);
        rows.push(BoundRow::at_most(format!("swap {s} circuit"), (p - circuit).abs(), 1e-15));
        rows.push(BoundRow::at_most(format!("swap {s} analytic"), (p - (0.5 + 0.5 * overlap)).abs(), 0.0));
        let est = qinvert::sample_probability(p, SWAP_SHOTS, s).stage("swap sampling")?;
        if est.covers(p) {
            covered += 1;
        }
    }
    rows.push(BoundRow::at_least("swap sampling within 3 sigma", f64::from(covered), 99.0));
    Ok(rows)
}

// -------------------------------------------------------------- perturbation

pub const PERTURBATION_INSTANCES: usize = 50;
/// Instances above this condition number are redrawn.
pub const MAX_PERTURBATION_KAPPA: f64 = 1e8;

/// Exact normalized Gaussian matrix and its coherent-state estimate with the
/// smallest order keeping `||A^{-1} E|| <= 1/2`.
pub fn coherent_instance(ds: &DataSet, sigma: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let exact = interpolation::assemble(ds, &Kernel::gaussian(sigma).stage("kernel")?, AssembleOptions::normalized())?;
    let exact = exact.to_dense();
    let lambda_min = interpolation::symmetric_eigenvalues(&exact)[0];
    let d = ds.dim() as f64;
    let ratio = ds.sites().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())) / sigma;
    let delta = (lambda_min / (4.0 * d)).min(0.5);
    let order = coherent::min_order(ratio, delta).stage("truncation order")?;
    let gram = coherent::gram_coherent(ds, sigma, order).stage("coherent gram")?;
    Ok((exact, gram.matrix.to_dense()))
}

fn perturbation_suite(rng: &mut ChaCha8Rng) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    let mut k = 0;
    while k < PERTURBATION_INSTANCES {
        let m = rng.gen_range(2..=10);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.1..0.4);
        let ds = random_dataset(rng, m, d, 0.0, 1.0)?;
        let ev = interpolation::symmetric_eigenvalues(&interpolation::assemble(
            &ds,
            &Kernel::gaussian(sigma).stage("kernel")?,
            AssembleOptions::normalized(),
        )?
        .to_dense());
        if ev[0] <= ev[m - 1] * MAX_PERTURBATION_KAPPA.recip() {
            continue;
        }
        let (exact, perturbed) = coherent_instance(&ds, sigma)?;
        if (&perturbed - &exact).amax() == 0.0 {
            // Truncation below roundoff leaves nothing to test.
            continue;
        }
        let chain = qinvert::perturbation_chain(&exact, &perturbed, ds.values()).stage("perturbation chain")?;
        let lemmas = &chain.lemmas;
        let case = format!("instance {k} m={m} d={d}");
        rows.push(BoundRow::check(format!("{case} solution"), chain.measured, None, chain.bound.map(|b| b + chain.roundoff)));
        rows.push(BoundRow::check(
            format!("{case} inverse change"),
            lemmas.inverse_change.unwrap_or(f64::NAN),
            None,
            lemmas.inverse_bound.map(|b| b + lemmas.tolerance),
        ));
        rows.push(BoundRow::at_most(format!("{case} eigenvalue shift"), lemmas.max_eigen_shift(), lemmas.e_norm + lemmas.tolerance));
        k += 1;
    }
    let ds = random_dataset(rng, 5, 2, 0.0, 1.0)?;
    let (exact, _) = coherent_instance(&ds, 0.4)?;
    let chain = qinvert::perturbation_chain(&exact, &exact, ds.values()).stage("perturbation chain")?;
    rows.push(BoundRow::check("zero perturbation", chain.measured, None, chain.bound.map(|b| b + chain.roundoff)));
    Ok(rows)
}

// ------------------------------------------------------------ compact-oracle

pub const COMPACT_DATASETS: usize = 10;
pub const DISTANCE_PAIRS: usize = 1000;
pub const AE_BITS: std::ops::RangeInclusive<u32> = 4..=12;
pub const AE_SEEDS: u64 = 4;

/// Wendland kernel with support twice the median nearest-neighbour distance.
pub fn wendland_for(ds: &DataSet, table: Wendland) -> Result<Kernel> {
    Kernel::wendland(table.dim(), table.smoothness(), 2.0 * ds.median_nearest_neighbor()).stage("kernel")
}

/// Mean `||A_hat - A||_F` over `seeds` amplitude-estimation streams for
/// each bit count.
pub fn estimated_matrix_errors(ds: &DataSet, kernel: Kernel, bits: &[u32], seeds: u64) -> Result<Vec<f64>> {
    let exact = interpolation::assemble(ds, &kernel, AssembleOptions::raw())?.to_dense();
    bits.iter()
        .map(|&b| {
            let mut total = 0.0;
            for s in 0..seeds {
                let est = compact::oracle_matrix(ds, &CompactOracleConfig::estimated(kernel, b, s)).stage("oracle matrix")?;
                total += (est.to_dense() - &exact).norm();
            }
            Ok(total / seeds as f64)
        })
        .collect()
}

fn compact_suite(rng: &mut ChaCha8Rng) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for k in 0..COMPACT_DATASETS {
        let m = rng.gen_range(5..=30);
        let d = rng.gen_range(1..=3);
        let ds = random_dataset(rng, m, d, 0.0, 1.0)?;
        let kernel = wendland_for(&ds, Wendland::D3C2)?;
        let report = compact::solve_compact(&ds, &CompactOracleConfig::exact(kernel), &InversionConfig::ideal())
            .stage("compact solve")?;
        let coeffs = interpolation::Coefficients::new(report.solve.coefficients());
        let mut residual = 0.0f64;
        for (site, y) in ds.sites().iter().zip(ds.values()) {
            residual = residual.max((interpolation::evaluate(&coeffs, &ds, &kernel, site)? - y).abs());
        }
        let case = format!("exact oracle {k} m={m} d={d}");
        rows.push(BoundRow::at_least(format!("{case} fidelity"), report.fidelity_vs_classical, 1.0 - 1e-10));
        rows.push(BoundRow::at_most(format!("{case} site residual"), residual, 1e-9));
    }

    let mut worst = 0.0f64;
    for _ in 0..DISTANCE_PAIRS {
        let d = rng.gen_range(1..=5);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = compact::distance_amplitude(&x, &z).stage("distance amplitude")?;
        let scale = (2.0 * (interpolation::norm(&x).powi(2) + interpolation::norm(&z).powi(2))).sqrt();
        worst = worst.max((a * scale - interpolation::distance(&x, &z)).abs());
    }
    rows.push(BoundRow::at_most(format!("distance amplitude over {DISTANCE_PAIRS} pairs"), worst, 1e-12));

    let ds = random_dataset(rng, 20, 2, 0.0, 1.0)?;
    let kernel = wendland_for(&ds, Wendland::D3C2)?;
    let bits: Vec<u32> = AE_BITS.collect();
    let errors = estimated_matrix_errors(&ds, kernel, &bits, AE_SEEDS)?;
    let scale: Vec<f64> = bits.iter().map(|&b| 0.5f64.powi(b as i32)).collect();
    rows.push(BoundRow::within("estimated matrix error slope", qcore::loglog_slope(&scale, &errors), 0.7, 1.3));

    for table in Wendland::ALL {
        let ds = random_dataset(rng, 30, table.dim() as usize, 0.0, 1.0)?;
        let kernel = wendland_for(&ds, table)?;
        let a = interpolation::assemble(&ds, &kernel, AssembleOptions::raw())?.to_dense();
        let lambda_min = interpolation::symmetric_eigenvalues(&a)[0];
        let cholesky_ok = interpolation::cholesky(&a).is_ok();
        let case = format!("wendland d={} k={}", table.dim(), table.smoothness());
        rows.push(BoundRow::at_least(format!("{case} smallest eigenvalue"), lambda_min, f64::MIN_POSITIVE));
        rows.push(BoundRow::at_least(format!("{case} cholesky"), f64::from(u8::from(cholesky_ok)), 1.0));
    }
    Ok(rows)
}
