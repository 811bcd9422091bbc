//! End-to-end pipelines: classical, quantum-global and quantum-compact.
//!
//! The classical fit always runs; quantum pipelines are reported next to it
//! query by query.

use std::path::Path;

use qrbf_core::coherent;
use qrbf_core::compact::{self, CompactError};
use qrbf_core::interpolation::{self, AssembleOptions, Coefficients, DataSet};
use qrbf_core::kernels::Kernel;
use qrbf_core::qcore::{self, DensityMatrix, PureState};
use qrbf_core::qinvert::{self, InversionConfig, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Budgets, DataSource, ExperimentConfig, Pipeline, QuerySource};
use crate::data::{gen_data, random_queries, read_query_file};
use crate::report::{complexity_note, write_json};
use crate::{HarnessError, Result, StageExt};

/// Independent seed for stream `k` of a run.
pub fn substream(seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng.gen()
}

const STREAM_NORMALIZATION: u64 = 2;
const STREAM_QUERY: u64 = 16;

pub fn load_dataset(config: &ExperimentConfig) -> Result<DataSet> {
    match &config.data {
        DataSource::File { path } => Ok(DataSet::read_csv(path)?),
        DataSource::Generate(g) => gen_data(g.m, g.d, g.lo, g.hi, g.seed.unwrap_or(config.seed), g.target),
    }
}

pub fn query_points(config: &ExperimentConfig, dataset: &DataSet) -> Result<Vec<Vec<f64>>> {
    let points = match &config.queries {
        QuerySource::Random { count } => random_queries(dataset, *count, config.seed),
        QuerySource::File { path } => read_query_file(path)?,
    };
    if let Some(p) = points.iter().find(|p| p.len() != dataset.dim()) {
        return Err(HarnessError::Config(format!("query of dimension {} for {}-d data", p.len(), dataset.dim())));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSummary {
    pub residual: f64,
    pub relative_residual: f64,
    pub coefficient_norm: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmeSummary {
    pub time: f64,
    pub steps: usize,
    pub trace_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuantumSummary {
    /// Fock levels per coordinate (global pipeline).
    pub truncation_order: Option<usize>,
    /// Matrix tolerance after the condition-number adjustment.
    pub matrix_tolerance: f64,
    /// `||A_quantum - A||_F` against the exact kernel matrix.
    pub matrix_error: f64,
    pub matrix_bound: Option<f64>,
    pub superposition_deviation: Option<f64>,
    pub dme: Option<DmeSummary>,
    pub sparsity: Option<usize>,
    pub kappa_eff: f64,
    pub rotation: f64,
    pub post_select_prob: f64,
    pub post_select_estimate: f64,
    pub coefficient_norm_est: f64,
    pub coefficient_norm_sampled: f64,
    /// `|<c_quantum | c_classical>|` of the normalized solutions.
    pub fidelity: f64,
    /// Sign-aligned distance between the normalized solutions.
    pub state_error: f64,
    pub repetitions: u64,
    pub deviation_from_ideal: Option<f64>,
    /// `1 / (lambda_min eps)`, the evolution time the budget calls for.
    pub t0_budget: f64,
    pub shots_f: u64,
    pub shots_p: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub f_classical: f64,
    /// Readout with exact probabilities.
    pub f_quantum_exact: Option<f64>,
    /// Readout with sampled probabilities.
    pub f_quantum: Option<f64>,
    pub abs_error: Option<f64>,
    /// First-order propagation of the tolerances to `f`.
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub pipeline: Pipeline,
    pub seed: u64,
    pub config_hash: String,
    pub complexity: String,
    pub m: usize,
    pub d: usize,
    pub classical: ClassicalSummary,
    pub quantum: Option<QuantumSummary>,
    pub max_abs_error: Option<f64>,
    /// Largest `abs_error / budget` over the queries.
    pub max_budget_ratio: Option<f64>,
    #[serde(skip)]
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub queries: Vec<QueryRow>,
}

fn sign_aligned_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let minus: f64 = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum();
    plus.min(minus).sqrt()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = interpolation::accurate_dot(v.iter().map(|&x| (x, x))).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Everything the readout needs from a solve.
struct Solved {
    state: Vec<f64>,
    /// `||c||` in the units of the unnormalized system.
    norm_est: f64,
    norm_sampled: f64,
    post_select_prob: f64,
    post_select_estimate: f64,
}

fn sampled_norm(solve: &SolveReport, y_norm: f64, scale: f64, budgets: &Budgets, seed: u64) -> Result<Solved> {
    let est = qinvert::sample_probability(solve.post_select_prob.min(1.0), budgets.shots_f(), substream(seed, STREAM_NORMALIZATION))
        .stage("normalization sampling")?;
    Ok(Solved {
        state: solve.state_out.clone(),
        norm_est: solve.c_norm_est / scale,
        norm_sampled: est.estimate.sqrt() * y_norm / solve.rotation / scale,
        post_select_prob: solve.post_select_prob,
        post_select_estimate: est.estimate,
    })
}

/// Swap-test readout at one query point together with its budget.
#[allow(clippy::too_many_arguments)]
fn readout(
    index: usize,
    x: &[f64],
    phi: &[f64],
    phi_norm: f64,
    solved: &Solved,
    classical: &Coefficients,
    f_classical: f64,
    budgets: &Budgets,
    seed: u64,
) -> Result<QueryRow> {
    let mut row = QueryRow {
        index,
        x: x.to_vec(),
        f_classical,
        f_quantum_exact: None,
        f_quantum: None,
        abs_error: None,
        budget: None,
    };
    if phi_norm == 0.0 {
        row.f_quantum_exact = Some(0.0);
        row.f_quantum = Some(0.0);
        row.abs_error = Some(f_classical.abs());
        row.budget = Some(0.0);
        return Ok(row);
    }
    let c_state = PureState::from_real(&solved.state).stage("readout")?;
    let phi_state = PureState::from_real(phi).stage("readout")?;
    let p = qinvert::swap_test(&c_state, &phi_state).stage("swap test")?;
    let overlap: f64 = solved.state.iter().zip(phi).map(|(c, f)| c * f).sum::<f64>() / phi_norm;
    let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
    let shots = budgets.shots_p();
    let est = qinvert::sample_probability(p.min(1.0), shots, substream(seed, STREAM_QUERY + index as u64))
        .stage("swap-test sampling")?;
    let exact = qinvert::readout_value(solved.norm_est, phi_norm, overlap);
    let sampled = qinvert::readout_value(solved.norm_sampled, phi_norm, sign * qinvert::overlap_magnitude(est.estimate));
    row.f_quantum_exact = Some(exact);
    row.f_quantum = Some(sampled);
    row.abs_error = Some((sampled - f_classical).abs());

    let c_norm = classical.norm;
    let o = if c_norm > 0.0 { (f_classical / (c_norm * phi_norm)).abs().min(1.0) } else { 0.0 };
    let big_p = solved.post_select_prob.min(1.0);
    let f = big_p.sqrt();
    let dp_f = (big_p * (1.0 - big_p) / budgets.shots_f() as f64).sqrt();
    let rel_f = dp_f.sqrt().min(dp_f / (2.0 * f)) / f;
    let p_c = 0.5 + 0.5 * o * o;
    let dp = (p_c * (1.0 - p_c) / shots as f64).sqrt();
    let d_overlap = if o > 0.0 { (2.0 * dp).sqrt().min(dp / o) } else { (2.0 * dp).sqrt() };
    row.budget = Some(phi_norm * c_norm * (o * (rel_f + budgets.eps_c) + budgets.eps_c + d_overlap));
    Ok(row)
}

fn classical_fit(dataset: &DataSet, kernel: &Kernel) -> Result<(Coefficients, ClassicalSummary)> {
    let coeffs = interpolation::fit(dataset, kernel).stage("classical fit")?;
    let matrix = interpolation::assemble(dataset, kernel, AssembleOptions::raw()).stage("classical assembly")?;
    let kappa = interpolation::spectrum(&matrix).kappa;
    let summary = ClassicalSummary {
        residual: coeffs.residual,
        relative_residual: coeffs.relative_residual,
        coefficient_norm: coeffs.norm,
        kappa,
    };
    Ok((coeffs, summary))
}

fn inversion_for(config: &ExperimentConfig) -> InversionConfig {
    InversionConfig {
        samples_f: config.budgets.shots_f(),
        samples_p: config.budgets.shots_p(),
        ..config.inversion.clone()
    }
}

fn lambda_min(solve: &SolveReport) -> f64 {
    solve.kept.iter().map(|&j| solve.eigvals[j]).fold(f64::INFINITY, f64::min)
}

fn run_global(
    config: &ExperimentConfig,
    dataset: &DataSet,
    queries: &[Vec<f64>],
    classical: &Coefficients,
    kappa: f64,
) -> Result<(QuantumSummary, Vec<QueryRow>)> {
    let Kernel::Gaussian { sigma } = config.kernel else {
        return Err(HarnessError::Config("quantum-global needs a Gaussian kernel".into()));
    };
    let (m, d) = (dataset.len(), dataset.dim());
    let tolerance = config.budgets.matrix_tolerance(kappa);
    let ratio_max = dataset.sites().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())) / sigma;
    let order = coherent::min_order(ratio_max, tolerance / (2.0 * d as f64)).stage("truncation order")?;
    let gram = coherent::gram_coherent(dataset, sigma, order).stage("coherent gram")?;
    let a = gram.matrix.to_dense();

    let superposition_deviation = match order.checked_pow(d as u32).and_then(|n| n.checked_mul(m)) {
        Some(size) if size <= config.density_cap => Some(
            coherent::superposition_gram_check(dataset, sigma, order, config.density_cap)
                .stage("superposition check")?
                .max_deviation,
        ),
        _ => None,
    };

    let dme = if m <= config.dme_max_sites {
        let t = config.dme_time;
        let steps = (t * t / config.budgets.eps_e).ceil() as usize;
        let a_rho = DensityMatrix::from_real(&a).stage("matrix exponentiation")?;
        let y_state = DensityMatrix::from_pure(&PureState::from_real(dataset.values()).stage("matrix exponentiation")?);
        let run = qcore::dme_evolve(&a_rho, &y_state, t, steps).stage("matrix exponentiation")?;
        Some(DmeSummary { time: t, steps, trace_error: run.trace_error })
    } else {
        None
    };

    let solve = qinvert::invert(&a, dataset.values(), &inversion_for(config)).stage("inversion")?;
    let y_norm = interpolation::norm(dataset.values());
    let solved = sampled_norm(&solve, y_norm, m as f64, &config.budgets, config.seed)?;
    let reference = normalized(&classical.c);
    let fidelity = solved.state.iter().zip(&reference).map(|(a, b)| a * b).sum::<f64>().abs();

    let mut rows = Vec::with_capacity(queries.len());
    for (index, x) in queries.iter().enumerate() {
        let phi = interpolation::basis_vector(dataset, &config.kernel, x).stage("basis vector")?;
        let phi_norm = interpolation::norm(&phi);
        let f_classical = interpolation::evaluate(classical, dataset, &config.kernel, x).stage("classical evaluate")?;
        rows.push(readout(index, x, &phi, phi_norm, &solved, classical, f_classical, &config.budgets, config.seed)?);
    }
    let summary = QuantumSummary {
        truncation_order: Some(order),
        matrix_tolerance: tolerance,
        matrix_error: gram.frobenius_error,
        matrix_bound: Some(gram.bound()),
        superposition_deviation,
        dme,
        sparsity: None,
        kappa_eff: solve.kappa_eff,
        rotation: solve.rotation,
        post_select_prob: solved.post_select_prob,
        post_select_estimate: solved.post_select_estimate,
        coefficient_norm_est: solved.norm_est,
        coefficient_norm_sampled: solved.norm_sampled,
        fidelity,
        state_error: sign_aligned_distance(&solved.state, &reference),
        repetitions: solve.repetitions,
        deviation_from_ideal: solve.deviation_from_ideal,
        t0_budget: 1.0 / (lambda_min(&solve) * config.budgets.combined()),
        shots_f: config.budgets.shots_f(),
        shots_p: config.budgets.shots_p(),
    };
    Ok((summary, rows))
}

fn run_compact(
    config: &ExperimentConfig,
    dataset: &DataSet,
    queries: &[Vec<f64>],
    classical: &Coefficients,
    kappa: f64,
) -> Result<(QuantumSummary, Vec<QueryRow>)> {
    let oracle = config.oracle();
    let report = compact::solve_compact(dataset, &oracle, &inversion_for(config)).stage("compact solve")?;
    let y_norm = interpolation::norm(dataset.values());
    let solved = sampled_norm(&report.solve, y_norm, 1.0, &config.budgets, config.seed)?;
    let reference = normalized(&classical.c);

    let mut rows = Vec::with_capacity(queries.len());
    for (index, x) in queries.iter().enumerate() {
        let f_classical = interpolation::evaluate(classical, dataset, &config.kernel, x).stage("classical evaluate")?;
        let (phi, phi_norm) = match compact::prepare_phi_state(x, dataset, &oracle) {
            Ok(s) => (s.phi, s.phi_norm_est),
            Err(CompactError::EmptyState) => (vec![0.0; dataset.len()], 0.0),
            Err(e) => return Err(e).stage("basis state"),
        };
        rows.push(readout(index, x, &phi, phi_norm, &solved, classical, f_classical, &config.budgets, config.seed)?);
    }
    let summary = QuantumSummary {
        truncation_order: None,
        matrix_tolerance: config.budgets.matrix_tolerance(kappa),
        matrix_error: report.matrix_error,
        matrix_bound: None,
        superposition_deviation: None,
        dme: None,
        sparsity: Some(report.sparsity),
        kappa_eff: report.solve.kappa_eff,
        rotation: report.solve.rotation,
        post_select_prob: solved.post_select_prob,
        post_select_estimate: solved.post_select_estimate,
        coefficient_norm_est: solved.norm_est,
        coefficient_norm_sampled: solved.norm_sampled,
        fidelity: report.fidelity_vs_classical,
        state_error: sign_aligned_distance(&solved.state, &reference),
        repetitions: report.solve.repetitions,
        deviation_from_ideal: report.solve.deviation_from_ideal,
        t0_budget: 1.0 / (lambda_min(&report.solve) * config.budgets.combined()),
        shots_f: config.budgets.shots_f(),
        shots_p: config.budgets.shots_p(),
    };
    Ok((summary, rows))
}

pub fn run_pipeline(config: &ExperimentConfig, dataset: &DataSet, queries: &[Vec<f64>]) -> Result<PipelineReport> {
    config.validate()?;
    let (classical, summary) = classical_fit(dataset, &config.kernel)?;
    let (quantum, rows) = match config.pipeline {
        Pipeline::Classical => {
            let rows = queries
                .iter()
                .enumerate()
                .map(|(index, x)| {
                    let f = interpolation::evaluate(&classical, dataset, &config.kernel, x).stage("classical evaluate")?;
                    Ok(QueryRow {
                        index,
                        x: x.clone(),
                        f_classical: f,
                        f_quantum_exact: None,
                        f_quantum: None,
                        abs_error: None,
                        budget: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (None, rows)
        }
        Pipeline::QuantumGlobal => {
            let (q, rows) = run_global(config, dataset, queries, &classical, summary.kappa)?;
            (Some(q), rows)
        }
        Pipeline::QuantumCompact => {
            let (q, rows) = run_compact(config, dataset, queries, &classical, summary.kappa)?;
            (Some(q), rows)
        }
    };
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.abs_error).collect();
    let max_abs_error = (!errors.is_empty()).then(|| errors.iter().copied().fold(0.0, f64::max));
    let ratios: Vec<f64> = rows
        .iter()
        .filter_map(|r| match (r.abs_error, r.budget) {
            (Some(e), Some(b)) if b > 0.0 => Some(e / b),
            (Some(e), Some(_)) => Some(if e == 0.0 { 0.0 } else { f64::INFINITY }),
            _ => None,
        })
        .collect();
    let max_budget_ratio = (!ratios.is_empty()).then(|| ratios.iter().copied().fold(0.0, f64::max));
    Ok(PipelineReport {
        pipeline: config.pipeline,
        seed: config.seed,
        config_hash: config.hash(),
        complexity: complexity_note(config.pipeline).into(),
        m: dataset.len(),
        d: dataset.dim(),
        classical: summary,
        quantum,
        max_abs_error,
        max_budget_ratio,
        coefficients: classical.c,
        queries: rows,
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn write_queries<W: std::io::Write>(writer: W, report: &PipelineReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["seed".to_string(), "config_hash".into(), "index".into()];
    header.extend((1..=report.d).map(|k| format!("x{k}")));
    header.extend(["f_classical", "f_quantum_exact", "f_quantum", "abs_error", "budget"].map(String::from));
    w.write_record(&header)?;
    for row in &report.queries {
        let mut rec = vec![report.seed.to_string(), report.config_hash.clone(), row.index.to_string()];
        rec.extend(row.x.iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", row.f_classical));
        rec.extend([row.f_quantum_exact, row.f_quantum, row.abs_error, row.budget].map(fmt));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.json`, `queries.csv` and `coefficients.csv` into `dir`.
pub fn write_report(report: &PipelineReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(dir.join("summary.json"), report)?;
    write_queries(std::fs::File::create(dir.join("queries.csv"))?, report)?;
    let mut w = csv::Writer::from_path(dir.join("coefficients.csv"))?;
    w.write_record(["seed", "config_hash", "index", "c"])?;
    for (j, c) in report.coefficients.iter().enumerate() {
        w.write_record([report.seed.to_string(), report.config_hash.clone(), j.to_string(), format!("{c:?}")])?;
    }
    w.flush()?;
    Ok(())
}
