//! The compact-kernel pipeline: distances encoded as amplitudes, estimated
//! matrix entries, the sparsity oracle, basis-state preparation and the
//! sparse solve.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpolation::{
    self, AssembleOptions, Coefficients, DataSet, InterpError, InterpMatrix, SparseSymmetric,
};
use crate::kernels::{Family, Kernel};
use crate::qcore::{CVector, PureState, QuantumError, C64};
use crate::qinvert::{self, InversionConfig, InvertError, SolveReport};

/// Slack on the rotation constraint `C_hat phi(0) <= 1`.
const ROTATION_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CompactError {
    #[error("both vectors of the pair are zero")]
    ZeroPair,
    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("kernel family {0:?} has no compact support")]
    NotCompact(Family),
    #[error("scaling {c_hat} times phi(0) = {phi0} exceeds one")]
    RotationTooLarge { c_hat: f64, phi0: f64 },
    #[error("query point is outside the support of every site")]
    EmptyState,
    #[error("amplitude must lie in [0, 1], got {0}")]
    InvalidAmplitude(f64),
    #[error("slot {slot} outside 1..={sparsity}")]
    SlotOutOfRange { slot: usize, sparsity: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Invert(#[from] InvertError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub type Result<T> = std::result::Result<T, CompactError>;

/// Outcome model for simulated amplitude estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AeModel {
    /// The two grid cells adjacent to the true phase, weighted by the
    /// canonical distribution.
    #[default]
    TwoCell,
    /// The full canonical outcome distribution, tails included.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactOracleConfig {
    pub kernel: Kernel,
    /// Amplitude-estimation bits; `None` returns exact entries.
    #[serde(default)]
    pub ae_bits: Option<u32>,
    /// State-preparation scaling; defaults to `1 / phi(0)`.
    #[serde(default)]
    pub c_hat: Option<f64>,
    #[serde(default)]
    pub ae_model: AeModel,
    #[serde(default)]
    pub seed: u64,
}

impl CompactOracleConfig {
    pub fn exact(kernel: Kernel) -> Self {
        Self { kernel, ae_bits: None, c_hat: None, ae_model: AeModel::TwoCell, seed: 0 }
    }

    pub fn estimated(kernel: Kernel, ae_bits: u32, seed: u64) -> Self {
        Self { ae_bits: Some(ae_bits), seed, ..Self::exact(kernel) }
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.support()
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat.unwrap_or(1.0 / self.kernel.phi0())
    }

    fn validate(&self) -> Result<()> {
        if !self.kernel.is_compact() {
            return Err(CompactError::NotCompact(self.kernel.family()));
        }
        let phi0 = self.kernel.phi0();
        let c_hat = self.c_hat();
        if c_hat * phi0 > 1.0 + ROTATION_SLACK {
            return Err(CompactError::RotationTooLarge { c_hat, phi0 });
        }
        Ok(())
    }
}

fn pair_norm(x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    if x_i.len() != x_j.len() {
        return Err(CompactError::DimensionMismatch { expected: x_i.len(), got: x_j.len() });
    }
    let n2: f64 = x_i.iter().chain(x_j).map(|v| v * v).sum();
    if n2 == 0.0 {
        return Err(CompactError::ZeroPair);
    }
    Ok(n2.sqrt())
}

/// `(|+> x_i - |-> x_j) / sqrt(||x_i||^2 + ||x_j||^2)` on a `2 x d` register,
/// where `x` stands for the unnormalized vector `||x|| |x>`.
pub fn pair_state(x_i: &[f64], x_j: &[f64]) -> Result<PureState> {
    let n = pair_norm(x_i, x_j)?;
    let d = x_i.len();
    let s = std::f64::consts::FRAC_1_SQRT_2 / n;
    let amps = CVector::from_fn(2 * d, |idx, _| {
        let k = idx % d;
        let v = if idx < d { x_i[k] - x_j[k] } else { x_i[k] + x_j[k] };
        C64::new(s * v, 0.0)
    });
    Ok(PureState::new(vec![2, d], amps)?)
}

/// `||x_i - x_j|| / sqrt(2 (||x_i||^2 + ||x_j||^2))`, the norm of the `|0>`
/// branch of `pair_state`.
pub fn distance_amplitude(x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    let n = pair_norm(x_i, x_j)?;
    let r = interpolation::distance(x_i, x_j);
    Ok((r / (std::f64::consts::SQRT_2 * n)).min(1.0))
}

/// `sin^2(pi delta) / (M^2 sin^2(pi delta / M))`, the probability of reading
/// a grid value `delta` cells away from the true phase.
fn fejer(delta: f64, grid: f64) -> f64 {
    let den = (PI * delta / grid).sin();
    if den.abs() < 1e-300 {
        return 1.0;
    }
    let num = (PI * delta).sin();
    (num * num) / (grid * grid * den * den)
}

fn check_amplitude(a: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&a) {
        return Err(CompactError::InvalidAmplitude(a));
    }
    Ok(a.clamp(0.0, 1.0))
}

/// Probability of each outcome `y in 0..2^bits` of canonical amplitude
/// estimation for amplitude `a`.
pub fn outcome_distribution(a: f64, bits: u32) -> Result<Vec<f64>> {
    let a = check_amplitude(a)?;
    let grid = (1u64 << bits) as f64;
    let x = grid * a.asin() / PI;
    Ok((0..1u64 << bits)
        .map(|y| {
            let y = y as f64;
            0.5 * (fejer(y - x, grid) + fejer(y + x, grid))
        })
        .collect())
}

/// Simulated amplitude estimation: draws a grid phase `y` and returns
/// `sin(pi y / 2^bits)`.
pub fn amplitude_estimate(a: f64, bits: u32, seed: u64, model: AeModel) -> Result<f64> {
    let a = check_amplitude(a)?;
    let grid = (1u64 << bits) as f64;
    let x = grid * a.asin() / PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = match model {
        AeModel::TwoCell => {
            let lo = x.floor();
            if x - lo < 1e-12 * grid.max(1.0) {
                lo
            } else if lo + 1.0 - x < 1e-12 * grid.max(1.0) {
                lo + 1.0
            } else {
                let (w_lo, w_hi) = (fejer(lo - x, grid), fejer(lo + 1.0 - x, grid));
                if rng.gen::<f64>() * (w_lo + w_hi) < w_lo {
                    lo
                } else {
                    lo + 1.0
                }
            }
        }
        AeModel::Full => {
            let dist = outcome_distribution(a, bits)?;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = dist.len() - 1;
            for (k, p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            pick as f64
        }
    };
    Ok((PI * y / grid).sin())
}

/// `pi / 2^bits + pi^2 / 4^bits`.
pub fn amplitude_error_bound(bits: u32) -> f64 {
    let grid = (1u64 << bits) as f64;
    PI / grid + PI * PI / (grid * grid)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for the ordered pair `(i, j)`.
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ i as u64) ^ j as u64)
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(CompactError::IndexOutOfRange { index, len });
    }
    Ok(())
}

/// Distance between sites `i` and `j`, exact or reconstructed from an
/// estimated amplitude.
pub fn reconstructed_distance(i: usize, j: usize, dataset: &DataSet, config: &CompactOracleConfig) -> Result<f64> {
    check_index(i, dataset.len())?;
    check_index(j, dataset.len())?;
    if i == j {
        return Ok(0.0);
    }
    let (x_i, x_j) = (dataset.site(i), dataset.site(j));
    let scale = std::f64::consts::SQRT_2 * pair_norm(x_i, x_j)?;
    let a = distance_amplitude(x_i, x_j)?;
    let a_hat = match config.ae_bits {
        None => a,
        Some(bits) => amplitude_estimate(a, bits, pair_seed(config.seed, i, j), config.ae_model)?,
    };
    Ok(a_hat * scale)
}

/// Matrix entry `phi(r_ij / alpha)` from the (possibly estimated) distance.
pub fn oracle_pa(i: usize, j: usize, dataset: &DataSet, config: &CompactOracleConfig) -> Result<f64> {
    let r = reconstructed_distance(i, j, dataset, config)?;
    Ok(config.kernel.profile(r))
}

/// Answer of the sparsity oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Row(usize),
    /// The column has fewer nonzeros than the requested slot.
    OutOfBand,
}

/// Row of the `slot`-th (1-based) nonzero of column `j`.
pub fn oracle_pv(j: usize, slot: usize, matrix: &InterpMatrix) -> Result<Slot> {
    let m = matrix.order();
    check_index(j, m)?;
    let sparsity = matrix.sparsity();
    if slot == 0 || slot > sparsity {
        return Err(CompactError::SlotOutOfRange { slot, sparsity });
    }
    let row = match matrix.storage() {
        interpolation::Storage::Sparse(s) => s.row(j).get(slot - 1).map(|&(i, _)| i),
        interpolation::Storage::Dense(a) => (0..m).filter(|&i| a[(i, j)] != 0.0).nth(slot - 1),
    };
    Ok(row.map_or(Slot::OutOfBand, Slot::Row))
}

/// Raw sparse matrix from the entry oracle on the classical sparsity
/// pattern. Estimated entries are averaged over `(i, j)` and `(j, i)`.
pub fn oracle_matrix(dataset: &DataSet, config: &CompactOracleConfig) -> Result<InterpMatrix> {
    config.validate()?;
    let pattern = interpolation::assemble(dataset, &config.kernel, AssembleOptions::raw())?;
    let m = dataset.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for i in 0..m {
        let Slot::Row(_) = oracle_pv(i, 1, &pattern)? else { continue };
        for slot in 1..=pattern.sparsity() {
            let Slot::Row(j) = oracle_pv(i, slot, &pattern)? else { break };
            if j < i {
                continue;
            }
            let v = if config.ae_bits.is_some() && i != j {
                0.5 * (oracle_pa(i, j, dataset, config)? + oracle_pa(j, i, dataset, config)?)
            } else {
                oracle_pa(i, j, dataset, config)?
            };
            if v != 0.0 {
                rows[i].push((j, v));
                if j != i {
                    rows[j].push((i, v));
                }
            }
        }
    }
    Ok(InterpMatrix::from_sparse(SparseSymmetric::from_rows(rows), false))
}

/// Post-selected basis state for a query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiState {
    pub state: PureState,
    pub success_prob: f64,
    pub phi_norm_est: f64,
    pub phi: Vec<f64>,
}

/// Rotates `|j>` by `C_hat phi(||x - x_j|| / alpha)` and post-selects.
pub fn prepare_phi_state(x: &[f64], dataset: &DataSet, config: &CompactOracleConfig) -> Result<PhiState> {
    config.validate()?;
    let phi = interpolation::basis_vector(dataset, &config.kernel, x)?;
    let m = dataset.len() as f64;
    let c_hat = config.c_hat();
    let sum_sq: f64 = phi.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(CompactError::EmptyState);
    }
    let success_prob = c_hat * c_hat * sum_sq / m;
    let phi_norm_est = (success_prob * m).sqrt() / c_hat;
    let state = PureState::from_real(&phi)?;
    Ok(PhiState { state, success_prob, phi_norm_est, phi })
}

/// Compact solve next to the classical sparse reference.
#[derive(Debug, Clone)]
pub struct CompactReport {
    pub solve: SolveReport,
    pub matrix: InterpMatrix,
    pub sparsity: usize,
    pub kappa: f64,
    /// `||A_hat - A||_F`.
    pub matrix_error: f64,
    pub classical: Coefficients,
    /// `|<state_out | c_classical / ||c_classical||>|` against the exact matrix.
    pub fidelity_vs_classical: f64,
}

pub fn solve_compact(dataset: &DataSet, config: &CompactOracleConfig, inversion: &InversionConfig) -> Result<CompactReport> {
    let matrix = oracle_matrix(dataset, config)?;
    let exact = interpolation::assemble(dataset, &config.kernel, AssembleOptions::raw())?;
    let classical = interpolation::solve(&exact, dataset.values())?;
    let dense: DMatrix<f64> = matrix.to_dense();
    let matrix_error = (&dense - exact.to_dense()).norm();
    let solve = qinvert::invert(&dense, dataset.values(), inversion)?;
    let fidelity = solve
        .state_out
        .iter()
        .zip(&classical.c)
        .map(|(s, c)| s * c / classical.norm)
        .sum::<f64>()
        .abs();
    let spectrum = interpolation::spectrum(&matrix);
    Ok(CompactReport {
        sparsity: matrix.sparsity(),
        kappa: spectrum.kappa,
        matrix: matrix.with_spectrum(),
        solve,
        matrix_error,
        classical,
        fidelity_vs_classical: fidelity,
    })
}

/// A row of the estimated-versus-exact matrix report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub ae_bits: u32,
    pub frobenius_error: f64,
    pub fidelity: f64,
}
