//! Dense quantum-state primitives and density-matrix exponentiation.
//!
//! States and operators are plain complex matrices over an ordered list of
//! subsystem dimensions; subsystem 0 is the most significant index.
//! Exponentials are taken through Hermitian eigendecompositions, and the swap
//! exponential uses its closed form since `S^2 = I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const NEGATIVITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subsystem {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },
    #[error("partial trace needs at least two subsystems")]
    SingleSubsystem,
    #[error("not a valid density matrix: {0}")]
    InvalidDensity(String),
    #[error("not a unit state: norm {0}")]
    NotNormalized(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("step count must be positive")]
    ZeroSteps,
}

pub type Result<T> = std::result::Result<T, QuantumError>;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(c)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().iter().sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// A unit vector over labelled subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(dims: Vec<usize>, amplitudes: CVector) -> Result<Self> {
        let total: usize = dims.iter().product();
        if amplitudes.len() != total {
            return Err(QuantumError::DimensionMismatch { expected: total, got: amplitudes.len() });
        }
        let n = amplitudes.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized(n));
        }
        Ok(Self { dims, amplitudes })
    }

    /// Normalizes `amplitudes` into a single-subsystem state.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(QuantumError::ZeroVector);
        }
        let dims = vec![amplitudes.len()];
        Ok(Self { dims, amplitudes: amplitudes / c(n) })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = c(1.0);
        Self { dims: vec![dim], amplitudes: v }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(QuantumError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState { dims, amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.re).collect()
    }

    /// Distance to `other` after removing the relative global phase.
    pub fn phase_aligned_distance(&self, other: &PureState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QuantumError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(phase_aligned_distance(self.amplitudes.as_slice(), other.amplitudes.as_slice()))
    }
}

/// `min_theta || u - e^{i theta} v ||`, computed from the aligned difference
/// rather than from `|<u|v>|` to avoid cancellation near zero.
pub fn phase_aligned_distance(u: &[C64], v: &[C64]) -> f64 {
    let overlap: C64 = v.iter().zip(u).map(|(a, b)| a.conj() * b).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    u.iter().zip(v).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>().sqrt()
}

/// A Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, data: CMatrix) -> Result<Self> {
        let rho = Self::unchecked(dims, data)?;
        rho.validate()?;
        Ok(rho)
    }

    fn unchecked(dims: Vec<usize>, data: CMatrix) -> Result<Self> {
        let total: usize = dims.iter().product();
        if data.nrows() != total || data.ncols() != total {
            return Err(QuantumError::DimensionMismatch { expected: total, got: data.nrows() });
        }
        Ok(Self { dims, data })
    }

    pub fn from_real(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(vec![a.nrows()], to_complex(a))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        Self { dims: psi.dims.clone(), data: v * v.adjoint() }
    }

    /// Checks Hermiticity, unit trace and (near-)nonnegative spectrum.
    pub fn validate(&self) -> Result<()> {
        let herm = frobenius_norm(&(&self.data - self.data.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(QuantumError::InvalidDensity(format!("anti-Hermitian part {herm:e}")));
        }
        let tr = self.data.trace();
        if (tr - c(1.0)).norm() > TRACE_TOL {
            return Err(QuantumError::InvalidDensity(format!("trace {tr}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOL {
            return Err(QuantumError::InvalidDensity(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.data + self.data.adjoint()) * c(0.5);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix { dims, data: kron(&self.data, &other.data) }
    }
}

/// `S = sum_{j,k} |j><k| ⊗ |k><j|` on `C^m ⊗ C^m`.
pub fn swap_operator(m: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(m * m, m * m);
    for j in 0..m {
        for k in 0..m {
            s[(j * m + k, k * m + j)] = 1.0;
        }
    }
    s
}

/// `exp(-i S dt) = cos(dt) I - i sin(dt) S`.
pub fn swap_exponential(m: usize, dt: f64) -> CMatrix {
    let s = swap_operator(m);
    let (sin, cos) = dt.sin_cos();
    CMatrix::from_fn(m * m, m * m, |i, j| {
        let id = if i == j { cos } else { 0.0 };
        C64::new(id, -sin * s[(i, j)])
    })
}

/// Traces out every subsystem except `keep`, without validating the result.
pub fn partial_trace_matrix(data: &CMatrix, dims: &[usize], keep: usize) -> Result<CMatrix> {
    if dims.len() < 2 {
        return Err(QuantumError::SingleSubsystem);
    }
    if keep >= dims.len() {
        return Err(QuantumError::SubsystemOutOfRange { index: keep, count: dims.len() });
    }
    let total: usize = dims.iter().product();
    if data.nrows() != total || data.ncols() != total {
        return Err(QuantumError::DimensionMismatch { expected: total, got: data.nrows() });
    }
    let left: usize = dims[..keep].iter().product();
    let kept = dims[keep];
    let right: usize = dims[keep + 1..].iter().product();
    let mut out = CMatrix::zeros(kept, kept);
    for a in 0..kept {
        for b in 0..kept {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..left {
                let row = (l * kept + a) * right;
                let col = (l * kept + b) * right;
                for r in 0..right {
                    acc += data[(row + r, col + r)];
                }
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: usize) -> Result<DensityMatrix> {
    let out = partial_trace_matrix(&rho.data, &rho.dims, keep)?;
    DensityMatrix::unchecked(vec![rho.dims[keep]], out)
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let phases = CVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QuantumError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

/// `exp(-i A t) rho exp(i A t)`.
pub fn exact_conjugation(a: &CMatrix, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if a.nrows() != rho.dim() {
        return Err(QuantumError::DimensionMismatch { expected: rho.dim(), got: a.nrows() });
    }
    let u = hermitian_exp(a, t);
    let data = &u * &rho.data * u.adjoint();
    DensityMatrix::unchecked(rho.dims.clone(), data)
}

/// One density-matrix exponentiation step:
/// `tr_1{ exp(-i S dt) (A ⊗ rho) exp(i S dt) }`.
pub fn dme_step(a: &DensityMatrix, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_same_dim(a, rho)?;
    let m = rho.dim();
    let u = swap_exponential(m, dt);
    let joint = kron(&a.data, &rho.data);
    let conj = &u * joint * u.adjoint();
    let out = partial_trace_matrix(&conj, &[m, m], 1)?;
    DensityMatrix::unchecked(rho.dims.clone(), out)
}

/// Result of an `l`-step exponentiation, with its distance to the exact
/// conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct DmeRun {
    pub state: DensityMatrix,
    pub exact: DensityMatrix,
    pub trace_error: f64,
    pub frobenius_error: f64,
}

/// Composes `l` steps of size `t / l` and compares with
/// `exp(-i A t) rho exp(i A t)`.
pub fn dme_evolve(a: &DensityMatrix, rho: &DensityMatrix, t: f64, l: usize) -> Result<DmeRun> {
    if l == 0 {
        return Err(QuantumError::ZeroSteps);
    }
    check_same_dim(a, rho)?;
    let dt = t / l as f64;
    let mut state = rho.clone();
    for _ in 0..l {
        state = dme_step(a, &state, dt)?;
    }
    let exact = exact_conjugation(&a.data, rho, t)?;
    let diff = &state.data - &exact.data;
    Ok(DmeRun { trace_error: trace_norm(&diff), frobenius_error: frobenius_norm(&diff), state, exact })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// A CSV row of a DME scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmeScalingRow {
    pub t: f64,
    pub l: usize,
    pub trace_error: f64,
    pub frobenius_error: f64,
}

/// Runs `dme_evolve` for each step count.
pub fn dme_scaling(a: &DensityMatrix, rho: &DensityMatrix, t: f64, steps: &[usize]) -> Result<Vec<DmeScalingRow>> {
    steps
        .iter()
        .map(|&l| {
            let run = dme_evolve(a, rho, t, l)?;
            Ok(DmeScalingRow { t, l, trace_error: run.trace_error, frobenius_error: run.frobenius_error })
        })
        .collect()
}

/// A random density matrix `G G^† / tr(G G^†)` with Gaussian-like entries
/// drawn from `rng`.
pub fn random_density<R: rand::Rng>(m: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let p = &g * g.adjoint();
    let tr = p.trace();
    DensityMatrix { dims: vec![m], data: p / tr }
}
