//! Simulated eigenvalue inversion for symmetric positive definite systems.
//!
//! Two fidelity levels share one report type. The ideal mode applies the map
//! `lambda -> C / lambda` exactly in the eigenbasis. The quantized mode runs
//! phase estimation on a `b`-bit clock register as a statevector: clock
//! value `k` stands for the eigenvalue estimate `2 pi k / t0`, the controlled
//! rotation is keyed on `k`, and the clock is uncomputed before
//! post-selecting on ancilla `1` and clock `0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpolation::{self, InterpError, InterpMatrix, PerturbationReport};
use crate::qcore::{self, CMatrix, PureState, QuantumError, C64};

pub const DEFAULT_CLOCK_CAP: u32 = 10;
/// Slack allowed between the rotation constant and the smallest eigenvalue.
pub const ROTATION_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InvertError {
    #[error("matrix is not symmetric positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("rotation constant {rotation} exceeds the smallest eigenvalue {lambda_min}")]
    RotationTooLarge { rotation: f64, lambda_min: f64 },
    #[error("rotation constant must be positive, got {0}")]
    InvalidRotation(f64),
    #[error("right-hand side is zero")]
    ZeroRhs,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no eigenvalue above the spectral floor {delta_eff} (largest is {lambda_max})")]
    EmptySpectrum { delta_eff: f64, lambda_max: f64 },
    #[error("spectral floor must be nonnegative, got {0}")]
    InvalidFloor(f64),
    #[error("phase wraparound: lambda_max t0 / 2pi = {phase} does not fit a clock of {clock} values")]
    Wraparound { phase: f64, clock: usize },
    #[error("clock of {bits} bits exceeds the cap of {cap}")]
    ClockTooWide { bits: u32, cap: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("post-selection never succeeds")]
    ZeroSuccess,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

pub type Result<T> = std::result::Result<T, InvertError>;

/// Ascending eigenvalues with eigenvectors as matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }
}

pub fn eigensolve(a: &DMatrix<f64>) -> Eigen {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Eigen { values, vectors }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFilter {
    pub kept: Vec<usize>,
    pub kappa_eff: f64,
}

/// Keeps eigenvalues strictly above `delta_eff`.
pub fn filter_spectrum(eigvals: &[f64], delta_eff: f64) -> Result<SpectrumFilter> {
    if delta_eff.is_nan() || delta_eff < 0.0 {
        return Err(InvertError::InvalidFloor(delta_eff));
    }
    let kept: Vec<usize> = (0..eigvals.len()).filter(|&j| eigvals[j] > delta_eff).collect();
    let lambda_max = eigvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_kept = kept.iter().map(|&j| eigvals[j]).fold(f64::INFINITY, f64::min);
    if kept.is_empty() {
        return Err(InvertError::EmptySpectrum { delta_eff, lambda_max });
    }
    Ok(SpectrumFilter { kept, kappa_eff: lambda_max / min_kept })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Ideal,
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    /// Rotation constant `C`; defaults to the smallest kept eigenvalue (or its
    /// grid estimate in quantized mode).
    pub rotation: Option<f64>,
    pub mode: Mode,
    /// Total evolution time of phase estimation.
    pub t0: f64,
    pub clock_bits: u32,
    pub clock_cap: u32,
    pub delta_eff: Option<f64>,
    /// Shots for estimating the post-selection probability.
    pub samples_f: u64,
    /// Shots for the swap test.
    pub samples_p: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            rotation: None,
            mode: Mode::Ideal,
            t0: 2.0 * PI * 64.0,
            clock_bits: 8,
            clock_cap: DEFAULT_CLOCK_CAP,
            delta_eff: None,
            samples_f: 10_000,
            samples_p: 10_000,
        }
    }
}

impl InversionConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn quantized(t0: f64, clock_bits: u32) -> Self {
        Self { mode: Mode::Quantized, t0, clock_bits, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub eigvals: Vec<f64>,
    /// `<u_j | y>` for the normalized right-hand side.
    pub overlaps: Vec<f64>,
    pub kept: Vec<usize>,
    pub kappa_eff: f64,
    pub rotation: f64,
    pub post_select_prob: f64,
    /// Normalization factor, `sqrt(post_select_prob)`.
    pub f: f64,
    /// `F ||y|| / C`.
    pub c_norm_est: f64,
    /// Real parts of the post-selected output state.
    pub state_out: Vec<f64>,
    /// Largest imaginary part discarded from `state_out`.
    pub imaginary_residual: f64,
    pub classical_norm: f64,
    pub fidelity_vs_classical: f64,
    /// Amplitude-amplification rounds, `ceil(1 / lambda_min)`; reported only.
    pub repetitions: u64,
    /// Phase-aligned distance to the ideal-mode state (quantized mode only).
    pub deviation_from_ideal: Option<f64>,
}

impl SolveReport {
    pub fn state(&self) -> Result<PureState> {
        Ok(PureState::from_real(&self.state_out)?)
    }

    /// The coefficient vector implied by the state and its norm estimate.
    pub fn coefficients(&self) -> Vec<f64> {
        self.state_out.iter().map(|v| v * self.c_norm_est).collect()
    }
}

struct Prepared {
    eigen: Eigen,
    filter: SpectrumFilter,
    overlaps: Vec<f64>,
    y_norm: f64,
}

fn prepare(a: &DMatrix<f64>, y: &[f64], delta_eff: Option<f64>) -> Result<Prepared> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(InvertError::DimensionMismatch { expected: m, got: a.ncols() });
    }
    if y.len() != m {
        return Err(InvertError::DimensionMismatch { expected: m, got: y.len() });
    }
    let y_norm = interpolation::norm(y);
    if y_norm == 0.0 {
        return Err(InvertError::ZeroRhs);
    }
    let eigen = eigensolve(a);
    let filter = match delta_eff {
        Some(d) => filter_spectrum(&eigen.values, d)?,
        None => {
            if eigen.values[0] <= 0.0 {
                return Err(InvertError::NotPositiveDefinite(eigen.values[0]));
            }
            filter_spectrum(&eigen.values, 0.0)?
        }
    };
    let y_hat = DVector::from_iterator(m, y.iter().map(|v| v / y_norm));
    let overlaps = (0..m).map(|j| eigen.vectors.column(j).dot(&y_hat)).collect();
    Ok(Prepared { eigen, filter, overlaps, y_norm })
}

/// Classical reference solution: Cholesky when it succeeds, otherwise the
/// eigenbasis solve restricted to the kept spectrum.
fn classical_solution(a: &DMatrix<f64>, y: &[f64], prep: &Prepared) -> Vec<f64> {
    let full = prep.filter.kept.len() == a.nrows();
    if full {
        if let Ok(c) = interpolation::solve(&InterpMatrix::from_dense(a.clone(), false), y) {
            return c.c;
        }
    }
    let mut c = DVector::zeros(a.nrows());
    for &j in &prep.filter.kept {
        c += prep.eigen.vector(j) * (prep.overlaps[j] * prep.y_norm / prep.eigen.values[j]);
    }
    c.as_slice().to_vec()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let n = interpolation::norm(v);
    v.iter().map(|x| x / n).collect()
}

fn abs_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs()
}

fn lambda_min_kept(prep: &Prepared) -> f64 {
    prep.filter.kept.iter().map(|&j| prep.eigen.values[j]).fold(f64::INFINITY, f64::min)
}

pub fn invert(a: &DMatrix<f64>, y: &[f64], config: &InversionConfig) -> Result<SolveReport> {
    match config.mode {
        Mode::Ideal => invert_ideal(a, y, config),
        Mode::Quantized => invert_quantized(a, y, config),
    }
}

/// Exact eigenvalue inversion followed by post-selection on the ancilla.
pub fn invert_ideal(a: &DMatrix<f64>, y: &[f64], config: &InversionConfig) -> Result<SolveReport> {
    let prep = prepare(a, y, config.delta_eff)?;
    let lambda_min = lambda_min_kept(&prep);
    let rotation = config.rotation.unwrap_or(lambda_min);
    if rotation.is_nan() || rotation <= 0.0 {
        return Err(InvertError::InvalidRotation(rotation));
    }
    if rotation > lambda_min + ROTATION_SLACK {
        return Err(InvertError::RotationTooLarge { rotation, lambda_min });
    }
    let m = a.nrows();
    let mut amplitude = DVector::zeros(m);
    for &j in &prep.filter.kept {
        amplitude += prep.eigen.vector(j) * (rotation * prep.overlaps[j] / prep.eigen.values[j]);
    }
    let prob = amplitude.norm_squared();
    if prob == 0.0 {
        return Err(InvertError::ZeroSuccess);
    }
    let f = prob.sqrt();
    let state_out: Vec<f64> = (amplitude / f).as_slice().to_vec();
    finish(a, y, &prep, Mode::Ideal, rotation, prob, state_out, 0.0, None)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    a: &DMatrix<f64>,
    y: &[f64],
    prep: &Prepared,
    mode: Mode,
    rotation: f64,
    prob: f64,
    state_out: Vec<f64>,
    imaginary_residual: f64,
    deviation_from_ideal: Option<f64>,
) -> Result<SolveReport> {
    let f = prob.sqrt();
    let classical = classical_solution(a, y, prep);
    let classical_norm = interpolation::norm(&classical);
    let fidelity = abs_dot(&state_out, &normalize(&classical));
    Ok(SolveReport {
        mode,
        eigvals: prep.eigen.values.clone(),
        overlaps: prep.overlaps.clone(),
        kept: prep.filter.kept.clone(),
        kappa_eff: prep.filter.kappa_eff,
        rotation,
        post_select_prob: prob,
        f,
        c_norm_est: f * prep.y_norm / rotation,
        state_out,
        imaginary_residual,
        classical_norm,
        fidelity_vs_classical: fidelity,
        repetitions: (1.0 / lambda_min_kept(prep)).ceil() as u64,
        deviation_from_ideal,
    })
}

/// Grid eigenvalue for clock value `k`.
fn grid_value(k: usize, t0: f64) -> f64 {
    2.0 * PI * k as f64 / t0
}

/// Phase estimation with a `b`-bit clock, eigenvalue-keyed rotation,
/// uncomputation and post-selection.
///
/// The two ancilla branches never mix after the rotation, so only the
/// ancilla-1 branch is carried through the uncomputation.
pub fn invert_quantized(a: &DMatrix<f64>, y: &[f64], config: &InversionConfig) -> Result<SolveReport> {
    if config.clock_bits == 0 {
        return Err(InvertError::InvalidConfig("clock needs at least one bit".into()));
    }
    if config.clock_bits > config.clock_cap {
        return Err(InvertError::ClockTooWide { bits: config.clock_bits, cap: config.clock_cap });
    }
    if !(config.t0 > 0.0 && config.t0.is_finite()) {
        return Err(InvertError::InvalidConfig(format!("t0 must be positive, got {}", config.t0)));
    }
    let prep = prepare(a, y, config.delta_eff)?;
    let t0 = config.t0;
    let clock = 1usize << config.clock_bits;
    let lambda_max = *prep.eigen.values.last().expect("nonempty spectrum");
    let phase = lambda_max * t0 / (2.0 * PI);
    if phase >= clock as f64 {
        return Err(InvertError::Wraparound { phase, clock });
    }
    let floor = config.delta_eff.unwrap_or(0.0);
    let rotation = match config.rotation {
        Some(r) => r,
        None => prep
            .filter
            .kept
            .iter()
            .map(|&j| grid_value((prep.eigen.values[j] * t0 / (2.0 * PI)).round() as usize, t0))
            .filter(|&g| g > floor && g > 0.0)
            .fold(f64::INFINITY, f64::min),
    };
    let rotation = if rotation.is_finite() { rotation } else { lambda_min_kept(&prep) };
    if rotation.is_nan() || rotation <= 0.0 {
        return Err(InvertError::InvalidRotation(rotation));
    }

    let m = a.nrows();
    let v = prep.eigen.vectors.map(|x| C64::new(x, 0.0));
    let vt = v.transpose();
    let step = t0 / clock as f64;
    // Row tau holds the system register for clock value tau.
    let controlled = |state: &mut CMatrix, sign: f64| {
        for tau in 0..clock {
            let row = state.row(tau).transpose();
            let mut w = &vt * row;
            for (j, wj) in w.iter_mut().enumerate() {
                *wj *= C64::from_polar(1.0, sign * prep.eigen.values[j] * tau as f64 * step);
            }
            state.set_row(tau, &(&v * w).transpose());
        }
    };
    let fourier = |sign: f64| {
        let scale = 1.0 / (clock as f64).sqrt();
        CMatrix::from_fn(clock, clock, |k, tau| {
            C64::from_polar(scale, sign * 2.0 * PI * ((k * tau) % clock) as f64 / clock as f64)
        })
    };

    // Hadamards on |0>: uniform clock superposition times |y>.
    let y_hat: Vec<C64> = y.iter().map(|v| C64::new(v / prep.y_norm, 0.0)).collect();
    let h = 1.0 / (clock as f64).sqrt();
    let mut state = CMatrix::from_fn(clock, m, |_, s| y_hat[s] * h);
    controlled(&mut state, 1.0);
    state = fourier(-1.0) * state;

    for k in 0..clock {
        let estimate = grid_value(k, t0);
        let r = if k == 0 || estimate <= floor { 0.0 } else { (rotation / estimate).min(1.0) };
        state.row_mut(k).scale_mut(r);
    }

    state = fourier(1.0) * state;
    controlled(&mut state, -1.0);
    let slice: Vec<C64> = (0..m).map(|s| state.column(s).sum() * h).collect();
    let prob: f64 = slice.iter().map(|z| z.norm_sqr()).sum();
    if prob == 0.0 {
        return Err(InvertError::ZeroSuccess);
    }
    let f = prob.sqrt();
    let out: Vec<C64> = slice.iter().map(|z| z / f).collect();
    let imaginary_residual = out.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    let state_out: Vec<f64> = out.iter().map(|z| z.re).collect();

    let ideal_config = InversionConfig { rotation: None, mode: Mode::Ideal, ..config.clone() };
    let ideal = invert_ideal(a, y, &ideal_config)?;
    let ideal_state: Vec<C64> = ideal.state_out.iter().map(|&w| C64::new(w, 0.0)).collect();
    let deviation = qcore::phase_aligned_distance(&out, &ideal_state);
    finish(a, y, &prep, Mode::Quantized, rotation, prob, state_out, imaginary_residual, Some(deviation))
}

/// Seeded Bernoulli estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    /// `3 sqrt(p (1 - p) / n)` at the estimate.
    pub half_width: f64,
    pub successes: u64,
    pub shots: u64,
}

impl ProbabilityEstimate {
    pub fn covers(&self, p: f64) -> bool {
        (self.estimate - p).abs() <= self.half_width
    }
}

pub fn sample_probability(p_true: f64, shots: u64, seed: u64) -> Result<ProbabilityEstimate> {
    if shots == 0 {
        return Err(InvertError::InvalidConfig("at least one shot is needed".into()));
    }
    let dist = Bernoulli::new(p_true).map_err(|_| InvertError::InvalidProbability(p_true))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let successes = dist.sample_iter(&mut rng).take(shots as usize).filter(|b| *b).count() as u64;
    let estimate = successes as f64 / shots as f64;
    let half_width = 3.0 * (estimate * (1.0 - estimate) / shots as f64).sqrt();
    Ok(ProbabilityEstimate { estimate, half_width, successes, shots })
}

/// Probability of measuring `0` on the swap-test control qubit.
pub fn swap_test(u: &PureState, v: &PureState) -> Result<f64> {
    let overlap = u.inner(v)?;
    Ok(0.5 + 0.5 * overlap.norm_sqr().min(1.0))
}

/// `|<u|v>|` recovered from a swap-test probability.
pub fn overlap_magnitude(p: f64) -> f64 {
    (2.0 * p - 1.0).max(0.0).sqrt()
}

/// `f(x) ~ ||c|| ||Phi(x)|| <c|Phi(x)>`.
pub fn readout_value(c_norm: f64, phi_norm: f64, overlap: f64) -> f64 {
    c_norm * phi_norm * overlap
}

/// Solution-state error under a matrix perturbation, next to its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    /// `|| |c_exact> - |c> ||` of the normalized solutions.
    pub measured: f64,
    /// `2 eps_A kappa^2 / ((1 - gamma) Lambda_max)`; absent when `gamma >= 1`.
    pub bound: Option<f64>,
    /// `||Delta A||_F`.
    pub eps_a: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub lambda_max: f64,
    /// Roundoff allowance of the two solves, `16 m kappa` machine epsilons.
    pub roundoff: f64,
    pub lemmas: PerturbationReport,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        let chain = self.bound.is_some_and(|b| self.measured <= b + self.roundoff);
        chain && self.lemmas.inverse_bound_holds() && self.lemmas.eigen_bound_holds()
    }
}

/// Compares the solutions of `exact c = y` and `perturbed c = y`.
pub fn perturbation_chain(exact: &DMatrix<f64>, perturbed: &DMatrix<f64>, y: &[f64]) -> Result<ChainReport> {
    let delta = perturbed - exact;
    let lemmas = interpolation::perturbation_check(exact, &delta)?;
    let solve = |a: &DMatrix<f64>| interpolation::solve(&InterpMatrix::from_dense(a.clone(), false), y);
    let c_exact = normalize(&solve(exact)?.c);
    let c = normalize(&solve(perturbed)?.c);
    let measured = interpolation::norm(&c_exact.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>());
    let ev = interpolation::symmetric_eigenvalues(exact);
    let (lambda_min, lambda_max) = (ev[0], ev[ev.len() - 1]);
    let kappa = lambda_max / lambda_min;
    let eps_a = delta.norm();
    let gamma = lemmas.ratio;
    let bound = (gamma < 1.0).then(|| 2.0 * eps_a * kappa * kappa / ((1.0 - gamma) * lambda_max));
    let roundoff = 16.0 * y.len() as f64 * kappa * f64::EPSILON;
    Ok(ChainReport { measured, bound, eps_a, gamma, kappa, lambda_max, roundoff, lemmas })
}
