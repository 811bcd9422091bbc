//! Acceptance suite: one PASS/FAIL line per criterion. Expected values come
//! from oracles written here against nalgebra, not from the library.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Complex, DMatrix, DVector};
use qrbf_core::coherent;
use qrbf_core::compact::{self, CompactOracleConfig};
use qrbf_core::interpolation::{self, AssembleOptions, DataSet};
use qrbf_core::kernels::{Kernel, Wendland};
use qrbf_core::qcore::{self, PureState};
use qrbf_core::qinvert::{self, InversionConfig};
use qrbf_harness::config::{Budgets, DataSource, ExperimentConfig, GeneratorSpec, Pipeline};
use qrbf_harness::pipeline::{load_dataset, query_points, run_pipeline};
use qrbf_harness::report::write_rows;
use qrbf_harness::verify::{self, Suite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ------------------------------------------------------------------ oracles

/// Least-squares slope of `ln y` against `ln x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// `|| exact - truncated ||` for ratio `r` keeping `n` levels: the tail mass
/// is summed directly and the rescaling of the kept part via `expm1`.
fn truncation_oracle(r: f64, n: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    // Squared amplitudes of the unit coherent state, e^{-r^2} r^{2k} / k!.
    let w = |k: usize| (-r * r + 2.0 * k as f64 * r.ln() - ln_factorial(k)).exp();
    let tail: f64 = (n..n + 400).map(w).sum();
    let rescale = (-0.5 * (-tail).ln_1p()).exp_m1();
    ((1.0 - tail) * rescale * rescale + tail).sqrt()
}

fn truncation_bound_oracle(r: f64, n: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    (2.0f64.ln() + 2.0 * n as f64 * r.ln() - ln_factorial(n)).exp().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn gaussian_matrix(ds: &DataSet, sigma: f64) -> DMatrix<f64> {
    let m = ds.len();
    DMatrix::from_fn(m, m, |i, j| (-dist(ds.site(i), ds.site(j)).powi(2) / (2.0 * sigma * sigma)).exp())
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().max()
}

fn solve(a: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    a.clone().lu().solve(&DVector::from_column_slice(y)).expect("nonsingular system")
}

fn unit(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}

fn random_sites(rng: &mut ChaCha8Rng, m: usize, d: usize, min_sep: f64) -> DataSet {
    let mut sites: Vec<Vec<f64>> = Vec::new();
    while sites.len() < m {
        let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        if sites.iter().all(|s| dist(s, &p) >= min_sep) {
            sites.push(p);
        }
    }
    let values = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DataSet::new(sites, values).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng, ev: &[f64]) -> DMatrix<f64> {
    let m = ev.len();
    let q = DMatrix::from_fn(m, m, |_, _| rng.gen::<f64>() - 0.5).qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(ev)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// `exp(-iAt) rho exp(iAt)` through the eigendecomposition of `A`.
fn conjugation_oracle(a: &DMatrix<Complex<f64>>, rho: &DMatrix<Complex<f64>>, t: f64) -> DMatrix<Complex<f64>> {
    let eig = a.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex::new(0.0, -l * t).exp()),
    );
    let u = &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
    &u * rho * u.adjoint()
}

fn trace_norm_oracle(a: &DMatrix<Complex<f64>>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum()
}

/// Swap test as a circuit on `control (x) u (x) v`: H, controlled swap, H.
fn swap_circuit_oracle(u: &[Complex<f64>], v: &[Complex<f64>]) -> f64 {
    let n = u.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![Complex::new(0.0, 0.0); 2 * n * n];
    for i in 0..n {
        for j in 0..n {
            let amp = u[i] * v[j] * h;
            psi[i * n + j] = amp;
            psi[n * n + i * n + j] = amp;
        }
    }
    let mut swapped = psi.clone();
    for i in 0..n {
        for j in 0..n {
            swapped[n * n + i * n + j] = psi[n * n + j * n + i];
        }
    }
    (0..n * n).map(|k| ((swapped[k] + swapped[n * n + k]) * h).norm_sqr()).sum()
}

// ---------------------------------------------------------------- criteria

fn truncation_bound() -> Outcome {
    let ratios: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let orders: Vec<usize> = (2..=30).collect();
    let start = Instant::now();
    let rows = coherent::truncation_sweep(&ratios, &orders).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst_ratio = 0.0f64;
    for row in &rows {
        let oracle = truncation_oracle(row.ratio, row.order);
        let bound = truncation_bound_oracle(row.ratio, row.order);
        ensure((row.measured - oracle).abs() <= 1e-9 * oracle + 1e-300, || {
            format!("ratio {} order {}: measured {:e} vs oracle {:e}", row.ratio, row.order, row.measured, oracle)
        })?;
        ensure(oracle <= bound, || format!("ratio {} order {}: {oracle:e} > bound {bound:e}", row.ratio, row.order))?;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(oracle / bound);
        }
    }
    ensure(rows.len() == 9 * 29, || format!("{} grid points", rows.len()))?;
    ensure(elapsed < 10.0, || format!("sweep took {elapsed:.2} s"))?;
    Ok(format!("{} grid points, worst measured/bound {worst_ratio:.3}, {elapsed:.3} s", rows.len()))
}

fn gram_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let m = rng.gen_range(1..=10);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.5..1.5);
        let order = rng.gen_range(2..=12);
        let ds = random_sites(&mut rng, m, d, 0.02);
        let g = coherent::gram_coherent(&ds, sigma, order).map_err(|e| e.to_string())?;
        let exact = gaussian_matrix(&ds, sigma);
        let max_coord = ds.sites().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let delta = truncation_bound_oracle(max_coord / sigma, order);
        let bound = 2.0 * d as f64 * delta;
        let coherent_inner = g.matrix.to_dense() * m as f64;
        let frob = (&coherent_inner / m as f64 - &exact / m as f64).norm();
        let entry = (&coherent_inner - &exact).amax();
        ensure(frob <= bound && entry <= bound, || {
            format!("dataset {k}: frobenius {frob:e}, entry {entry:e}, bound {bound:e}")
        })?;
        if bound > 0.0 {
            worst = worst.max(entry / bound);
        }
    }
    let mut worst_trace = 0.0f64;
    for k in 0..20 {
        let m = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=2);
        let order = rng.gen_range(1..=6);
        let sigma = rng.gen_range(0.5..1.5);
        let ds = random_sites(&mut rng, m, d, 0.02);
        let r = coherent::superposition_gram_check(&ds, sigma, order, coherent::DEFAULT_SUPERPOSITION_CAP)
            .map_err(|e| e.to_string())?;
        let g = coherent::gram_coherent(&ds, sigma, order).map_err(|e| e.to_string())?.matrix.to_dense();
        let dev = (&r.reduced - &g).amax();
        ensure(dev <= 1e-12 && r.max_imaginary <= 1e-12, || format!("superposition {k}: deviation {dev:e}"))?;
        worst_trace = worst_trace.max(dev);
    }
    Ok(format!("50 datasets, worst entry/bound {worst:.3}; partial trace deviation {worst_trace:.1e}"))
}

fn gershgorin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let m = rng.gen_range(1..=20);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.05..2.0);
        let ds = random_sites(&mut rng, m, d, 0.0);
        let lib = interpolation::assemble(&ds, &Kernel::gaussian(sigma).unwrap(), AssembleOptions::normalized())
            .map_err(|e| e.to_string())?
            .to_dense();
        let oracle = gaussian_matrix(&ds, sigma) / m as f64;
        ensure((&lib - &oracle).amax() <= 1e-15, || format!("dataset {k}: assembled matrix differs"))?;
        let lambda_max = eigenvalues(&lib)[m - 1];
        ensure(lambda_max <= 1.0 + 1e-12, || format!("dataset {k}: lambda_max {lambda_max}"))?;
        worst = worst.max(lambda_max);
    }
    Ok(format!("100 datasets, largest eigenvalue {worst:.15}"))
}

fn dme_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let steps = [8usize, 16, 32, 64, 128, 256, 512];
    let mut slopes = Vec::new();
    for &t in &[0.5, 1.0, 2.0] {
        for _ in 0..3 {
            let a = qcore::random_density(4, &mut rng);
            let rho = qcore::random_density(4, &mut rng);
            let exact = conjugation_oracle(a.matrix(), rho.matrix(), t);
            let mut errors = Vec::new();
            for &l in &steps {
                let run = qcore::dme_evolve(&a, &rho, t, l).map_err(|e| e.to_string())?;
                errors.push(trace_norm_oracle(&(run.state.matrix() - &exact)));
            }
            let s = slope(&steps.map(|l| l as f64), &errors);
            ensure((s + 1.0).abs() <= 0.2, || format!("t = {t}: slope in l {s}"))?;
            slopes.push(s);
        }
    }
    let dts = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let mut single = Vec::new();
    for _ in 0..3 {
        let a = qcore::random_density(4, &mut rng);
        let rho = qcore::random_density(4, &mut rng);
        let errors: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let step = qcore::dme_step(&a, &rho, dt).unwrap();
                trace_norm_oracle(&(step.matrix() - conjugation_oracle(a.matrix(), rho.matrix(), dt)))
            })
            .collect();
        let s = slope(&dts, &errors);
        ensure((s - 2.0).abs() <= 0.2, || format!("single-step slope {s}"))?;
        single.push(s);
    }
    let range = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (lo, hi) = range(&slopes);
    let (slo, shi) = range(&single);
    Ok(format!("slopes in l [{lo:.3}, {hi:.3}], single-step slopes in dt [{slo:.3}, {shi:.3}]"))
}

fn ideal_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut worst_fid, mut worst_norm) = (1.0f64, 0.0f64);
    for k in 0..100 {
        let m = rng.gen_range(1..=16);
        let kappa = 10f64.powf(rng.gen_range(0.0..3.0));
        let ev: Vec<f64> = (0..m).map(|j| if j == 0 { 1.0 / kappa } else { rng.gen_range(1.0 / kappa..1.0) }).collect();
        let a = random_spd(&mut rng, &ev);
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = qinvert::invert_ideal(&a, &y, &InversionConfig::ideal()).map_err(|e| e.to_string())?;
        let c = solve(&a, &y);
        let fidelity = DVector::from_column_slice(&r.state_out).dot(&unit(&c)).abs();
        let rel = (r.c_norm_est - c.norm()).abs() / c.norm();
        let spectrum = eigenvalues(&a);
        let kappa_oracle = spectrum[m - 1] / spectrum[0];
        ensure(fidelity >= 1.0 - 1e-10, || format!("system {k}: fidelity {fidelity}"))?;
        ensure(rel <= 1e-9, || format!("system {k}: norm relative error {rel:e}"))?;
        ensure(r.post_select_prob >= (1.0 - 1e-12) / (kappa_oracle * kappa_oracle), || {
            format!("system {k}: probability {} below kappa^-2 {}", r.post_select_prob, kappa_oracle.powi(-2))
        })?;
        worst_fid = worst_fid.min(fidelity);
        worst_norm = worst_norm.max(rel);
    }
    Ok(format!("100 systems, worst fidelity 1 - {:.1e}, worst norm error {worst_norm:.1e}", 1.0 - worst_fid))
}

fn quantized_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst_grid = 0.0f64;
    for k in 0..20 {
        let bits: u32 = rng.gen_range(3..=8);
        let t0 = 2.0 * PI * f64::from(1u32 << (bits - 2));
        let m = rng.gen_range(1..=4);
        let ev: Vec<f64> = (0..m).map(|_| 2.0 * PI * f64::from(rng.gen_range(1..1u32 << bits)) / t0).collect();
        let a = random_spd(&mut rng, &ev);
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = qinvert::invert_quantized(&a, &y, &InversionConfig::quantized(t0, bits)).map_err(|e| e.to_string())?;
        let oracle = unit(&solve(&a, &y));
        let out = DVector::from_column_slice(&r.state_out);
        let dev = (&out - &oracle).norm().min((&out + &oracle).norm());
        ensure(dev <= 1e-10, || format!("on-grid case {k} (bits {bits}): deviation {dev:e}"))?;
        worst_grid = worst_grid.max(dev);
    }

    // Generic spectra: ensemble mean over instances, clock widened with t0.
    let systems: Vec<(DMatrix<f64>, Vec<f64>)> = (0..40)
        .map(|_| {
            let ev: Vec<f64> = (0..4).map(|_| rng.gen_range(0.25..1.0)).collect();
            let a = random_spd(&mut rng, &ev);
            (a, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        })
        .collect();
    let mut t0s = Vec::new();
    let mut means = Vec::new();
    for j in 1..=9u32 {
        let bits = (j + 1).min(10);
        let t0 = 2.0 * PI * f64::from(1u32 << j);
        let mut total = 0.0;
        for (a, y) in &systems {
            let r = qinvert::invert_quantized(a, y, &InversionConfig::quantized(t0, bits)).map_err(|e| e.to_string())?;
            let oracle = unit(&solve(a, y));
            let out = DVector::from_column_slice(&r.state_out);
            total += (&out - &oracle).norm().min((&out + &oracle).norm());
        }
        t0s.push(t0);
        means.push(total / systems.len() as f64);
    }
    let s = slope(&t0s, &means);
    ensure((s + 1.0).abs() <= 0.3, || format!("generic slope {s} (means {means:?})"))?;
    Ok(format!("on-grid worst deviation {worst_grid:.1e}; generic slope {s:.3} over t0 = 2 pi 2^j, j = 1..9"))
}

fn perturbation_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut count = 0;
    let mut worst = 0.0f64;
    while count < 50 {
        let m = rng.gen_range(2..=10);
        let d = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.1..0.4);
        let ds = random_sites(&mut rng, m, d, 0.02);
        let ev = eigenvalues(&(gaussian_matrix(&ds, sigma) / m as f64));
        if ev[0] <= ev[m - 1] * 1e-8 {
            continue;
        }
        let (exact, perturbed) = verify::coherent_instance(&ds, sigma).map_err(|e| e.to_string())?;
        let e = &perturbed - &exact;
        if e.amax() == 0.0 {
            continue;
        }
        let y = ds.values();
        let measured = {
            let (a, b) = (unit(&solve(&exact, y)), unit(&solve(&perturbed, y)));
            (&a - &b).norm().min((&a + &b).norm())
        };
        let ev = eigenvalues(&exact);
        let (lmin, lmax) = (ev[0], ev[m - 1]);
        let kappa = lmax / lmin;
        let a_inv = exact.clone().try_inverse().unwrap();
        let gamma = spectral_norm(&(&a_inv * &e));
        ensure(gamma < 1.0, || format!("instance {count}: gamma {gamma}"))?;
        let eps_a = e.norm();
        let bound = 2.0 * eps_a * kappa * kappa / ((1.0 - gamma) * lmax);
        // Roundoff of two solves, matching the library allowance.
        let roundoff = 16.0 * m as f64 * kappa * f64::EPSILON;
        ensure(measured <= bound + roundoff, || format!("instance {count}: {measured:e} > {bound:e}"))?;

        let slack = 1e-12 * (lmax + spectral_norm(&e) + spectral_norm(&a_inv));
        let inv_change = spectral_norm(&(perturbed.clone().try_inverse().unwrap() - &a_inv));
        let inv_bound = spectral_norm(&e) * spectral_norm(&a_inv).powi(2) / (1.0 - gamma);
        ensure(inv_change <= inv_bound + slack, || format!("instance {count}: inverse change {inv_change:e} > {inv_bound:e}"))?;
        let shifted = eigenvalues(&perturbed);
        let shift = shifted.iter().zip(&ev).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        ensure(shift <= spectral_norm(&e) + slack, || format!("instance {count}: eigenvalue shift {shift:e}"))?;

        let lib = qinvert::perturbation_chain(&exact, &perturbed, y).map_err(|e| e.to_string())?;
        ensure(lib.holds(), || format!("instance {count}: library chain report fails: {lib:?}"))?;
        // Both solves carry roundoff of order kappa times machine epsilon.
        ensure((lib.measured - measured).abs() <= 1e-9 * measured + 1e-13 * kappa, || {
            format!("instance {count}: library measured {:e} vs {measured:e}", lib.measured)
        })?;
        worst = worst.max(measured / bound);
        count += 1;
    }
    Ok(format!("50 coherent-route instances, worst measured/bound {worst:.2e}, both matrix inequalities hold"))
}

fn swap_readout() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut covered = 0;
    let mut worst_circuit = 0.0f64;
    for seed in 0..100u64 {
        let n = rng.gen_range(2..=4);
        let raw: Vec<Complex<f64>> = (0..2 * n).map(|_| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let u = PureState::normalized(DVector::from_column_slice(&raw[..n])).unwrap();
        let v = PureState::normalized(DVector::from_column_slice(&raw[n..])).unwrap();
        let p = qinvert::swap_test(&u, &v).unwrap();
        let circuit = swap_circuit_oracle(u.amplitudes().as_slice(), v.amplitudes().as_slice());
        let overlap = u.amplitudes().dotc(v.amplitudes()).norm_sqr();
        ensure((p - circuit).abs() <= 1e-15 && (p - (0.5 + 0.5 * overlap)).abs() <= 1e-15, || {
            format!("seed {seed}: p {p} circuit {circuit}")
        })?;
        worst_circuit = worst_circuit.max((p - circuit).abs());
        let shots = 1_000_000u64;
        let est = qinvert::sample_probability(p, shots, seed).unwrap();
        if (est.estimate - p).abs() <= 3.0 * (p * (1.0 - p) / shots as f64).sqrt() {
            covered += 1;
        }
    }
    ensure(covered >= 99, || format!("only {covered} of 100 estimates within 3 sigma"))?;

    // End to end: quantum-global readout against an independent classical fit.
    let eps = 1e-2;
    let config = ExperimentConfig {
        seed: 8,
        pipeline: Pipeline::QuantumGlobal,
        kernel: Kernel::gaussian(0.15).unwrap(),
        data: DataSource::Generate(GeneratorSpec { m: 8, d: 2, ..GeneratorSpec::default() }),
        budgets: Budgets { eps_a: eps, eps_e: eps, eps_c: eps, eps_f: eps, eps_p: eps },
        ..ExperimentConfig::default()
    };
    let ds = load_dataset(&config).map_err(|e| e.to_string())?;
    let queries = query_points(&config, &ds).map_err(|e| e.to_string())?;
    ensure(queries.len() == 20, || format!("{} queries", queries.len()))?;
    let report = run_pipeline(&config, &ds, &queries).map_err(|e| e.to_string())?;
    let q = report.quantum.as_ref().ok_or("no quantum summary")?;
    let c = solve(&gaussian_matrix(&ds, 0.15), ds.values());
    let shots = (1.0 / (eps * eps)).ceil();
    let big_p = q.post_select_prob;
    let f = big_p.sqrt();
    let dp_f = (big_p * (1.0 - big_p) / shots).sqrt();
    let rel_f = (dp_f.sqrt()).min(dp_f / (2.0 * f)) / f;
    let mut worst = 0.0f64;
    for (x, row) in queries.iter().zip(&report.queries) {
        let phi = DVector::from_iterator(ds.len(), ds.sites().iter().map(|s| (-dist(s, x).powi(2) / (2.0 * 0.15 * 0.15)).exp()));
        let f_classical = phi.dot(&c);
        let o = (f_classical / (phi.norm() * c.norm())).abs();
        let p = 0.5 + 0.5 * o * o;
        let dp = (p * (1.0 - p) / shots).sqrt();
        let d_overlap = if o > 0.0 { (2.0 * dp).sqrt().min(dp / o) } else { (2.0 * dp).sqrt() };
        let budget = phi.norm() * c.norm() * (o * (rel_f + eps) + eps + d_overlap);
        let f_quantum = row.f_quantum.ok_or("missing readout")?;
        let err = (f_quantum - f_classical).abs();
        ensure(err <= 3.0 * budget, || format!("query {}: |error| {err:e} > 3 x {budget:e}", row.index))?;
        worst = worst.max(err / budget);
    }
    Ok(format!(
        "circuit agreement {worst_circuit:.1e}; {covered}/100 within 3 sigma; 20 queries, worst error/budget {worst:.3}"
    ))
}

fn compact_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let (mut worst_fid, mut worst_res) = (1.0f64, 0.0f64);
    for k in 0..10 {
        let m = rng.gen_range(5..=30);
        let d = rng.gen_range(1..=3);
        let ds = random_sites(&mut rng, m, d, 0.02);
        let alpha = 2.0 * ds.median_nearest_neighbor();
        let kernel = Kernel::wendland(3, 2, alpha).unwrap();
        let a = DMatrix::from_fn(m, m, |i, j| kernel.profile(dist(ds.site(i), ds.site(j))));
        let c = solve(&a, ds.values());
        let r = compact::solve_compact(&ds, &CompactOracleConfig::exact(kernel), &InversionConfig::ideal())
            .map_err(|e| e.to_string())?;
        let fid = DVector::from_column_slice(&r.solve.state_out).dot(&unit(&c)).abs();
        let coeffs = r.solve.coefficients();
        let residual = (0..m)
            .map(|i| {
                let f: f64 = (0..m).map(|j| coeffs[j] * kernel.profile(dist(ds.site(i), ds.site(j)))).sum();
                (f - ds.values()[i]).abs()
            })
            .fold(0.0, f64::max);
        ensure(fid >= 1.0 - 1e-10, || format!("dataset {k}: fidelity {fid}"))?;
        ensure(residual <= 1e-9, || format!("dataset {k}: site residual {residual:e}"))?;
        worst_fid = worst_fid.min(fid);
        worst_res = worst_res.max(residual);
    }

    let mut worst_dist = 0.0f64;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=5);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = compact::distance_amplitude(&x, &z).unwrap();
        let n2: f64 = x.iter().chain(&z).map(|v| v * v).sum();
        worst_dist = worst_dist.max((a * (2.0 * n2).sqrt() - dist(&x, &z)).abs());
    }
    ensure(worst_dist <= 1e-12, || format!("distance error {worst_dist:e}"))?;

    let ds = random_sites(&mut rng, 20, 2, 0.02);
    let kernel = Kernel::wendland(3, 2, 2.0 * ds.median_nearest_neighbor()).unwrap();
    let exact = DMatrix::from_fn(20, 20, |i, j| kernel.profile(dist(ds.site(i), ds.site(j))));
    let bits: Vec<u32> = (4..=12).collect();
    let errors: Vec<f64> = bits
        .iter()
        .map(|&b| {
            (0..4u64)
                .map(|s| (compact::oracle_matrix(&ds, &CompactOracleConfig::estimated(kernel, b, s)).unwrap().to_dense() - &exact).norm())
                .sum::<f64>()
                / 4.0
        })
        .collect();
    let scale: Vec<f64> = bits.iter().map(|&b| 0.5f64.powi(b as i32)).collect();
    let s = slope(&scale, &errors);
    ensure((s - 1.0).abs() <= 0.3, || format!("estimated-matrix slope {s} (errors {errors:?})"))?;

    let mut smallest = f64::INFINITY;
    for table in Wendland::ALL {
        let ds = random_sites(&mut rng, 30, table.dim() as usize, 0.02);
        let kernel = Kernel::wendland(table.dim(), table.smoothness(), 2.0 * ds.median_nearest_neighbor()).unwrap();
        let a = DMatrix::from_fn(30, 30, |i, j| kernel.profile(dist(ds.site(i), ds.site(j))));
        let lmin = eigenvalues(&a)[0];
        ensure(lmin > 0.0, || format!("{table:?}: smallest eigenvalue {lmin:e}"))?;
        ensure(a.clone().cholesky().is_some(), || format!("{table:?}: Cholesky fails"))?;
        smallest = smallest.min(lmin);
    }
    Ok(format!(
        "fidelity 1 - {:.1e}, residual {worst_res:.1e}; distances {worst_dist:.1e}; slope {s:.3}; Wendland smallest eigenvalue {smallest:.2e}",
        1.0 - worst_fid
    ))
}

fn determinism() -> Outcome {
    let mut sizes = Vec::new();
    for suite in Suite::ALL {
        let render = || {
            let rows = verify::verify_bounds(suite, 2024, "fixed").unwrap();
            let mut buf = Vec::new();
            write_rows(&mut buf, &rows).unwrap();
            buf
        };
        let (first, second) = (render(), render());
        ensure(first == second, || format!("suite {} differs between runs", suite.name()))?;
        sizes.push(format!("{} {} B", suite.name(), first.len()));
    }

    // Through the binary: two runs into separate directories.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_qrbf"))
            .args(["verify-bounds", "--suite", "dme", "--seed", "77", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || format!("binary exit {:?}", status.status))?;
        bodies.push(std::fs::read(out.join("verify-dme.csv")).map_err(|e| e.to_string())?);
    }
    ensure(bodies[0] == bodies[1], || "binary CSV bodies differ".into())?;
    Ok(format!("byte-identical reruns: {}; binary rerun identical", sizes.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("truncation bound", truncation_bound),
        ("gram construction", gram_construction),
        ("gershgorin bound", gershgorin),
        ("matrix exponentiation scaling", dme_scaling),
        ("ideal inversion", ideal_inversion),
        ("quantized inversion", quantized_inversion),
        ("perturbation chain", perturbation_chain),
        ("swap-test readout", swap_readout),
        ("compact pipeline", compact_pipeline),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.2} s) {detail}", k + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.2} s) {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
