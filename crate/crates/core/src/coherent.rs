//! Truncated coherent states and the Gram-matrix route to the Gaussian kernel.
//!
//! A coherent state with ratio `rho = r / sigma` has amplitudes proportional
//! to `rho^k / sqrt(k!)`. Keeping the first `N` of them gives a unit vector
//! whose inner products approximate `exp(-(x - y)^2 / (2 sigma^2))`.
//! Everything is computed in log space so orders of a few hundred are safe.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpolation::{self, AssembleOptions, DataSet, InterpError, InterpMatrix};
use crate::kernels::{Kernel, KernelError};
use crate::qcore::{self, CVector, DensityMatrix, PureState, QuantumError};

/// Extra Fock levels used for the "exact" reference state.
pub const REFERENCE_EXTRA: usize = 200;
/// Extra levels of the truncated displacement generator.
pub const DISPLACEMENT_EXTRA: usize = 60;
pub const DEFAULT_SUPERPOSITION_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum CoherentError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("truncation order must be at least 1")]
    ZeroOrder,
    #[error("coordinate must be finite, got {0}")]
    NonFinite(f64),
    #[error("ratio {0} overflows the normalization exp(ratio^2)")]
    Overflow(f64),
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("superposition register of size {size} exceeds the cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub type Result<T> = std::result::Result<T, CoherentError>;

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln(rho^{2k} / k!)` for `k < n`, with `rho = 0` giving `-inf` past `k = 0`.
fn log_weights(ratio: f64, n: usize) -> Vec<f64> {
    let lf = ln_factorials(n);
    let l2 = 2.0 * ratio.abs().ln();
    (0..n)
        .map(|k| if k == 0 { 0.0 } else if ratio == 0.0 { f64::NEG_INFINITY } else { k as f64 * l2 - lf[k] })
        .collect()
}

fn check_inputs(r: f64, sigma: f64, order: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CoherentError::InvalidSigma(sigma));
    }
    if order == 0 {
        return Err(CoherentError::ZeroOrder);
    }
    if !r.is_finite() {
        return Err(CoherentError::NonFinite(r));
    }
    let ratio = r / sigma;
    if ratio * ratio >= f64::MAX.ln() {
        return Err(CoherentError::Overflow(ratio));
    }
    Ok(ratio)
}

/// A coherent state cut to its first `order` Fock amplitudes and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCoherent {
    ratio: f64,
    amplitudes: Vec<f64>,
    partial_norm: f64,
    full_norm: f64,
    tail: f64,
}

impl TruncatedCoherent {
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn order(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// `sum_{k<N} rho^{2k} / k!`.
    pub fn partial_norm(&self) -> f64 {
        self.partial_norm
    }

    /// `exp(rho^2)`.
    pub fn full_norm(&self) -> f64 {
        self.full_norm
    }

    /// `exp(rho^2) - sum_{k<N} rho^{2k} / k!`, computed from the tail terms.
    pub fn norm_gap(&self) -> f64 {
        self.full_norm * self.tail
    }

    pub fn inner(&self, other: &TruncatedCoherent) -> Result<f64> {
        if self.order() != other.order() {
            return Err(CoherentError::DimensionMismatch { expected: self.order(), got: other.order() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a * b).sum())
    }
}

pub fn coherent_state(r: f64, sigma: f64, order: usize) -> Result<TruncatedCoherent> {
    let ratio = check_inputs(r, sigma, order)?;
    let logs = log_weights(ratio, order);
    let lse = log_sum_exp(&logs);
    let negative = ratio < 0.0;
    let amplitudes = logs
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let a = (0.5 * (l - lse)).exp();
            if negative && k % 2 == 1 {
                -a
            } else {
                a
            }
        })
        .collect();
    let full_norm = (ratio * ratio).exp();
    let tail = tail_mass(ratio, order);
    Ok(TruncatedCoherent { ratio, amplitudes, partial_norm: full_norm * (1.0 - tail), full_norm, tail })
}

/// `sqrt(2 rho^{2N} / N!)`.
pub fn truncation_bound(r: f64, sigma: f64, order: usize) -> Result<f64> {
    let ratio = check_inputs(r, sigma, order)?;
    Ok(bound_from_ratio(ratio, order))
}

fn bound_from_ratio(ratio: f64, order: usize) -> f64 {
    if ratio == 0.0 {
        return 0.0;
    }
    let lf = ln_factorials(order)[order];
    (0.5 * (2f64.ln() + 2.0 * order as f64 * ratio.abs().ln() - lf)).exp()
}

/// Smallest order whose truncation bound at `ratio_max` is at most `delta`.
pub fn min_order(ratio_max: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoherentError::InvalidTolerance(delta));
    }
    if !ratio_max.is_finite() {
        return Err(CoherentError::NonFinite(ratio_max));
    }
    if ratio_max == 0.0 {
        return Ok(1);
    }
    let target = delta.ln();
    let l2 = 2.0 * ratio_max.abs().ln();
    let mut lf = 0.0;
    let mut n = 0usize;
    loop {
        n += 1;
        lf += (n as f64).ln();
        if 0.5 * (2f64.ln() + n as f64 * l2 - lf) <= target {
            return Ok(n);
        }
    }
}

/// Probability mass beyond level `order` of the reference state of order
/// `order + REFERENCE_EXTRA`.
fn tail_mass(ratio: f64, order: usize) -> f64 {
    if ratio == 0.0 {
        return 0.0;
    }
    let logs = log_weights(ratio, order + REFERENCE_EXTRA);
    (log_sum_exp(&logs[order..]) - log_sum_exp(&logs)).exp()
}

/// `||reference - truncated||` against the order `N + 200` reference.
///
/// With tail mass `z` the squared distance is `2(1 - sqrt(1 - z))`, written
/// in a form that keeps its relative accuracy when `z` is tiny.
pub fn measured_truncation_error(r: f64, sigma: f64, order: usize) -> Result<f64> {
    let ratio = check_inputs(r, sigma, order)?;
    let z = tail_mass(ratio, order);
    Ok((2.0 * z / (1.0 + (1.0 - z).sqrt())).sqrt())
}

/// The truncated state at order `order + REFERENCE_EXTRA`.
pub fn reference_state(r: f64, sigma: f64, order: usize) -> Result<TruncatedCoherent> {
    coherent_state(r, sigma, order + REFERENCE_EXTRA)
}

/// A bound-verification row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub ratio: f64,
    pub order: usize,
    pub bound: f64,
    pub measured: f64,
}

impl TruncationRow {
    pub fn passes(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Measured error and bound over every `(ratio, order)` pair, with `sigma = 1`.
pub fn truncation_sweep(ratios: &[f64], orders: &[usize]) -> Result<Vec<TruncationRow>> {
    let mut rows = Vec::with_capacity(ratios.len() * orders.len());
    for &ratio in ratios {
        for &order in orders {
            rows.push(TruncationRow {
                ratio,
                order,
                bound: truncation_bound(ratio, 1.0, order)?,
                measured: measured_truncation_error(ratio, 1.0, order)?,
            });
        }
    }
    Ok(rows)
}

/// Tensor product of per-coordinate coherent states; coordinate 0 is the most
/// significant index.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCoherent {
    components: Vec<TruncatedCoherent>,
}

impl ProductCoherent {
    pub fn components(&self) -> &[TruncatedCoherent] {
        &self.components
    }

    pub fn order(&self) -> usize {
        self.components.first().map_or(0, TruncatedCoherent::order)
    }

    pub fn total_dim(&self) -> usize {
        self.order().pow(self.components.len() as u32)
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for c in &self.components {
            out = out.iter().flat_map(|a| c.amplitudes().iter().map(move |b| a * b)).collect();
        }
        out
    }

    /// Product of component inner products.
    pub fn inner(&self, other: &ProductCoherent) -> Result<f64> {
        if self.components.len() != other.components.len() {
            return Err(CoherentError::DimensionMismatch {
                expected: self.components.len(),
                got: other.components.len(),
            });
        }
        self.components.iter().zip(&other.components).try_fold(1.0, |acc, (a, b)| Ok(acc * a.inner(b)?))
    }
}

pub fn product_state(x: &[f64], sigma: f64, order: usize) -> Result<ProductCoherent> {
    let components = x.iter().map(|&xi| coherent_state(xi, sigma, order)).collect::<Result<_>>()?;
    Ok(ProductCoherent { components })
}

/// `||reference product - truncated product||`, from the per-coordinate tail
/// masses: the overlap is `prod sqrt(1 - z_k)`.
pub fn measured_product_error(x: &[f64], sigma: f64, order: usize) -> Result<f64> {
    let mut log_overlap = 0.0;
    for &xi in x {
        let ratio = check_inputs(xi, sigma, order)?;
        log_overlap += 0.5 * (-tail_mass(ratio, order)).ln_1p();
    }
    Ok((-2.0 * log_overlap.exp_m1()).max(0.0).sqrt())
}

/// The truncation bound at the largest `|x_k| / sigma`.
pub fn product_bound(x: &[f64], sigma: f64, order: usize) -> Result<f64> {
    let r = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    truncation_bound(r, sigma, order)
}

pub fn coherent_inner(x: &[f64], y: &[f64], sigma: f64, order: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(CoherentError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    product_state(x, sigma, order)?.inner(&product_state(y, sigma, order)?)
}

/// Coherent-state Gram matrix next to the exact Gaussian matrix.
#[derive(Debug, Clone)]
pub struct GramReport {
    /// Normalized: entries are inner products over `m`.
    pub matrix: InterpMatrix,
    pub exact: InterpMatrix,
    /// `||A_coherent - A_exact||_F` of the normalized matrices.
    pub frobenius_error: f64,
    /// Largest unnormalized `|<psi_i|psi_j> - exp(-r_ij^2 / 2 sigma^2)|`.
    pub max_inner_error: f64,
    /// Truncation bound at the largest coordinate magnitude.
    pub delta: f64,
    pub dim: usize,
    pub min_eigenvalue: f64,
}

impl GramReport {
    /// `2 d delta`.
    pub fn bound(&self) -> f64 {
        2.0 * self.dim as f64 * self.delta
    }

    pub fn bound_holds(&self) -> bool {
        self.frobenius_error <= self.bound() && self.max_inner_error <= self.bound()
    }

    /// `A_coherent - A_exact`.
    pub fn perturbation(&self) -> DMatrix<f64> {
        self.matrix.to_dense() - self.exact.to_dense()
    }
}

pub fn gram_coherent(dataset: &DataSet, sigma: f64, order: usize) -> Result<GramReport> {
    let m = dataset.len();
    let states = dataset.sites().iter().map(|s| product_state(s, sigma, order)).collect::<Result<Vec<_>>>()?;
    let mut inner = DMatrix::from_diagonal_element(m, m, 1.0);
    for i in 0..m {
        for j in i + 1..m {
            let v = states[i].inner(&states[j])?;
            inner[(i, j)] = v;
            inner[(j, i)] = v;
        }
    }
    let exact = interpolation::assemble(dataset, &Kernel::gaussian(sigma)?, AssembleOptions::normalized())?;
    let exact_dense = exact.to_dense();
    let scale = m as f64;
    let normalized = inner / scale;
    let diff = &normalized - &exact_dense;
    let max_inner_error = diff.amax() * scale;
    let frobenius_error = diff.norm();
    let max_coord = dataset.sites().iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_eigenvalue = interpolation::symmetric_eigenvalues(&normalized)[0];
    Ok(GramReport {
        matrix: InterpMatrix::from_dense(normalized, true),
        exact,
        frobenius_error,
        max_inner_error,
        delta: truncation_bound(max_coord, sigma, order)?,
        dim: dataset.dim(),
        min_eigenvalue,
    })
}

/// Reduced density matrix of `(1/sqrt m) sum_j |j>|psi_j>` next to the Gram
/// matrix it should reproduce.
#[derive(Debug, Clone)]
pub struct SuperpositionReport {
    pub reduced: DMatrix<f64>,
    pub max_deviation: f64,
    pub max_imaginary: f64,
    pub trace: f64,
}

impl SuperpositionReport {
    pub fn matches(&self, tol: f64) -> bool {
        self.max_deviation <= tol && self.max_imaginary <= tol
    }
}

/// Builds the joint state explicitly, traces out the feature register and
/// compares with `gram_coherent`.
pub fn superposition_gram_check(dataset: &DataSet, sigma: f64, order: usize, cap: usize) -> Result<SuperpositionReport> {
    let m = dataset.len();
    let feature_dim = order.pow(dataset.dim() as u32);
    let size = m * feature_dim;
    if size > cap {
        return Err(CoherentError::CapExceeded { size, cap });
    }
    let mut psi = CVector::zeros(size);
    let weight = 1.0 / (m as f64).sqrt();
    for (j, site) in dataset.sites().iter().enumerate() {
        let amps = product_state(site, sigma, order)?.amplitudes();
        for (k, a) in amps.iter().enumerate() {
            psi[j * feature_dim + k] = qcore::C64::new(weight * a, 0.0);
        }
    }
    let state = PureState::new(vec![m, feature_dim], psi)?;
    let rho = DensityMatrix::from_pure(&state);
    let reduced = qcore::partial_trace_matrix(rho.matrix(), rho.dims(), 0)?;
    let gram = gram_coherent(dataset, sigma, order)?.matrix.to_dense();
    let real = reduced.map(|z| z.re);
    let max_imaginary = reduced.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    let max_deviation = (&real - gram).amax();
    Ok(SuperpositionReport { trace: real.trace(), reduced: real, max_deviation, max_imaginary })
}

/// `exp(rho (a^dag - a)) |0>` on `order + DISPLACEMENT_EXTRA` levels, cut back
/// to `order` levels and renormalized.
pub fn displacement_state(ratio: f64, order: usize) -> Result<Vec<f64>> {
    check_inputs(ratio, 1.0, order)?;
    let dim = order + DISPLACEMENT_EXTRA;
    // G = rho (a^dag - a) is real antisymmetric; H = -i G is Hermitian and
    // exp(G) = exp(i H).
    let mut h = qcore::CMatrix::zeros(dim, dim);
    for k in 1..dim {
        let v = ratio * (k as f64).sqrt();
        h[(k, k - 1)] = qcore::C64::new(0.0, -v);
        h[(k - 1, k)] = qcore::C64::new(0.0, v);
    }
    let u = qcore::hermitian_exp(&h, -1.0);
    let column: Vec<f64> = (0..order).map(|k| u[(k, 0)].re).collect();
    let n = interpolation::norm(&column);
    Ok(column.iter().map(|v| v / n).collect())
}

/// Largest amplitude difference between the displacement route and the
/// Taylor amplitudes at the same order.
pub fn displacement_cross_check(ratio: f64, order: usize) -> Result<f64> {
    let taylor = coherent_state(ratio, 1.0, order)?;
    let disp = displacement_state(ratio, order)?;
    Ok(taylor.amplitudes().iter().zip(&disp).fold(0.0f64, |a, (t, d)| a.max((t - d).abs())))
}
