//! Classical RBF interpolation: data sets, interpolation matrices, the SPD
//! solves and the spectral and perturbation checks every quantum route is
//! judged against.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{Kernel, KernelError};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("data set is empty")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sites {first} and {second} coincide")]
    DuplicateSite { first: usize, second: usize },
    #[error("non-finite value in data set at row {0}")]
    NonFinite(usize),
    #[error("kernel {0:?} is not positive definite; set the override to assemble anyway")]
    KernelNotPositiveDefinite(crate::kernels::Family),
    #[error("matrix is not positive definite: pivot {index} is {value:e}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, InterpError>;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of products in twice the working precision (error-free products via
/// FMA, error-free sums), rounded once at the end.
pub fn accurate_dot(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (a, b) in terms {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + pe;
        sum = t;
    }
    sum + err
}

/// `m` distinct sites in `d` dimensions with their target values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    sites: Vec<Vec<f64>>,
    values: Vec<f64>,
    norms: Vec<f64>,
    dim: usize,
}

impl DataSet {
    pub fn new(sites: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let dim = sites.first().map(Vec::len).ok_or(InterpError::Empty)?;
        if dim == 0 {
            return Err(InterpError::DimensionMismatch { expected: 1, got: 0 });
        }
        if values.len() != sites.len() {
            return Err(InterpError::DimensionMismatch { expected: sites.len(), got: values.len() });
        }
        for (j, (site, y)) in sites.iter().zip(&values).enumerate() {
            if site.len() != dim {
                return Err(InterpError::DimensionMismatch { expected: dim, got: site.len() });
            }
            if !y.is_finite() || site.iter().any(|x| !x.is_finite()) {
                return Err(InterpError::NonFinite(j));
            }
        }
        // Exact-equality duplicate scan: sort lexicographically, compare neighbours.
        let mut order: Vec<usize> = (0..sites.len()).collect();
        let cmp = |a: &Vec<f64>, b: &Vec<f64>| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x + 0.0).total_cmp(&(y + 0.0)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        order.sort_by(|&a, &b| cmp(&sites[a], &sites[b]));
        for w in order.windows(2) {
            if cmp(&sites[w[0]], &sites[w[1]]).is_eq() {
                let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(InterpError::DuplicateSite { first, second });
            }
        }
        let norms = sites.iter().map(|s| norm(s)).collect();
        Ok(Self { sites, values, norms, dim })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn site(&self, j: usize) -> &[f64] {
        &self.sites[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Smallest pairwise distance between sites (infinite for `m = 1`).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(distance(&self.sites[i], &self.sites[j]));
            }
        }
        best
    }

    /// Median over sites of the distance to the nearest other site.
    pub fn median_nearest_neighbor(&self) -> f64 {
        let m = self.len();
        if m < 2 {
            return f64::INFINITY;
        }
        let mut nn: Vec<f64> = (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| j != i)
                    .map(|j| distance(&self.sites[i], &self.sites[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        if m % 2 == 1 {
            nn[m / 2]
        } else {
            0.5 * (nn[m / 2 - 1] + nn[m / 2])
        }
    }

    /// Reads `x1,...,xd,y` rows with a header line.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 2 || &headers[cols - 1] != "y" {
            return Err(InterpError::Format(format!("expected header x1,...,xd,y, got {headers:?}")));
        }
        for (k, h) in headers.iter().take(cols - 1).enumerate() {
            if h != format!("x{}", k + 1) {
                return Err(InterpError::Format(format!("column {} should be x{}, got {h}", k + 1, k + 1)));
            }
        }
        let mut sites = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let mut parsed = parsed.map_err(|e| InterpError::Format(format!("row {}: {e}", row + 1)))?;
            let y = parsed.pop().ok_or_else(|| InterpError::Format(format!("row {} is empty", row + 1)))?;
            sites.push(parsed);
            values.push(y);
        }
        Self::new(sites, values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (site, y) in self.sites.iter().zip(&self.values) {
            let row: Vec<String> = site.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}")).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }
}

/// Symmetric sparse storage: per-row column lists sorted ascending, both
/// triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    /// Takes per-row `(column, value)` lists; each row is sorted by column.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        Self { rows }
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Sparse(SparseSymmetric),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub max: f64,
    pub min: f64,
    pub kappa: f64,
}

/// An interpolation matrix plus the bookkeeping the solvers need.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpMatrix {
    storage: Storage,
    normalized: bool,
    spectrum: Option<Spectrum>,
    sparsity: usize,
}

impl InterpMatrix {
    /// Wraps a dense symmetric matrix. Sparsity is the largest count of
    /// nonzeros in any row.
    pub fn from_dense(matrix: DMatrix<f64>, normalized: bool) -> Self {
        let sparsity = (0..matrix.nrows())
            .map(|i| matrix.row(i).iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap_or(0);
        Self { storage: Storage::Dense(matrix), normalized, spectrum: None, sparsity }
    }

    pub fn from_sparse(matrix: SparseSymmetric, normalized: bool) -> Self {
        let sparsity = matrix.rows.iter().map(Vec::len).max().unwrap_or(0);
        Self { storage: Storage::Sparse(matrix), normalized, spectrum: None, sparsity }
    }

    pub fn order(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.nrows(),
            Storage::Sparse(s) => s.order(),
        }
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn spectrum(&self) -> Option<Spectrum> {
        self.spectrum
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[(i, j)],
            Storage::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Sparse(s) => {
                let n = s.order();
                let mut a = DMatrix::zeros(n, n);
                for i in 0..n {
                    for &(j, v) in s.row(i) {
                        a[(i, j)] = v;
                    }
                }
                a
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(a) => (a * DVector::from_column_slice(x)).as_slice().to_vec(),
            Storage::Sparse(s) => s.mul_vec(x),
        }
    }

    /// Computes and caches the spectrum.
    pub fn with_spectrum(mut self) -> Self {
        self.spectrum = Some(spectrum(&self));
        self
    }

    /// Dense rows as CSV without a header.
    pub fn write_dense_csv<W: Write>(&self, writer: W) -> Result<()> {
        let a = self.to_dense();
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for i in 0..a.nrows() {
            w.write_record(a.row(i).iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Nonzero entries as `i,j,value` triples.
    pub fn write_triplets_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "value"])?;
        let n = self.order();
        for i in 0..n {
            let row: Vec<(usize, f64)> = match &self.storage {
                Storage::Sparse(s) => s.row(i).to_vec(),
                Storage::Dense(a) => (0..n).map(|j| (j, a[(i, j)])).filter(|(_, v)| *v != 0.0).collect(),
            };
            for (j, v) in row {
                w.write_record([i.to_string(), j.to_string(), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssembleOptions {
    /// Scale entries by `1/m`.
    pub normalized: bool,
    /// Accept kernels that are not positive definite (the multiquadric).
    pub allow_non_pd: bool,
    /// Keep dense storage even for compact kernels.
    pub force_dense: bool,
}

impl AssembleOptions {
    pub fn raw() -> Self {
        Self::default()
    }

    pub fn normalized() -> Self {
        Self { normalized: true, ..Self::default() }
    }
}

/// Builds `A_ij = phi(||x_i - x_j||)` (times `1/m` when normalized). Compact
/// kernels produce sparse storage unless `force_dense` is set.
pub fn assemble(dataset: &DataSet, kernel: &Kernel, opts: AssembleOptions) -> Result<InterpMatrix> {
    if !kernel.is_positive_definite() && !opts.allow_non_pd {
        return Err(InterpError::KernelNotPositiveDefinite(kernel.family()));
    }
    let m = dataset.len();
    let scale = if opts.normalized { 1.0 / m as f64 } else { 1.0 };
    let diag = kernel.phi0() * scale;
    if kernel.is_compact() && !opts.force_dense {
        let support = kernel.support();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..m).map(|i| vec![(i, diag)]).collect();
        for i in 0..m {
            for j in i + 1..m {
                let r = distance(dataset.site(i), dataset.site(j));
                if r > support {
                    continue;
                }
                let v = kernel.profile(r) * scale;
                if v != 0.0 {
                    rows[i].push((j, v));
                    rows[j].push((i, v));
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        let sparsity = rows.iter().map(Vec::len).max().unwrap_or(0);
        return Ok(InterpMatrix {
            storage: Storage::Sparse(SparseSymmetric { rows }),
            normalized: opts.normalized,
            spectrum: None,
            sparsity,
        });
    }
    let mut a = DMatrix::from_diagonal_element(m, m, diag);
    for i in 0..m {
        for j in i + 1..m {
            let v = kernel.profile(distance(dataset.site(i), dataset.site(j))) * scale;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(InterpMatrix::from_dense(a, opts.normalized))
}

/// Lower Cholesky factor; a nonpositive pivot is reported by index and value.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(InterpError::NotPositiveDefinite { index: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[(i, k)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[(k, i)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    z
}

pub const CG_TOLERANCE: f64 = 1e-12;

/// Conjugate gradients on an SPD operator, stopping at relative residual
/// `tol` or `max_iter` iterations.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..max_iter {
        let ap = apply(&p);
        let curvature: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if curvature <= 0.0 {
            return Err(InterpError::NotPositiveDefinite { index: it, value: curvature });
        }
        let step = rr / curvature;
        for k in 0..n {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        let rr_next: f64 = r.iter().map(|v| v * v).sum();
        if rr_next.sqrt() <= tol * b_norm {
            // Recompute the true residual; the recursive one drifts.
            let ax = apply(&x);
            let true_res = norm(&ax.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>());
            if true_res <= tol * b_norm {
                return Ok(x);
            }
            r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            p = r.clone();
            rr = r.iter().map(|v| v * v).sum();
            continue;
        }
        let beta = rr_next / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_next;
    }
    let ax = apply(&x);
    let residual = norm(&ax.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>()) / b_norm;
    Err(InterpError::NotConverged { iterations: max_iter, residual })
}

/// Interpolation coefficients with their norm and fit residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c: Vec<f64>,
    pub norm: f64,
    /// `max_j |f(x_j) - y_j|` when the right-hand side is the data vector
    /// (scaled back by `m` for normalized systems).
    pub residual: f64,
    /// `||A c - y|| / ||y||`.
    pub relative_residual: f64,
}

impl Coefficients {
    pub fn new(c: Vec<f64>) -> Self {
        let norm = norm(&c);
        Self { c, norm, residual: 0.0, relative_residual: 0.0 }
    }
}

/// Solves `A c = y`: Cholesky for dense storage, conjugate gradients for
/// sparse storage.
pub fn solve(matrix: &InterpMatrix, y: &[f64]) -> Result<Coefficients> {
    let m = matrix.order();
    if y.len() != m {
        return Err(InterpError::DimensionMismatch { expected: m, got: y.len() });
    }
    let c = match matrix.storage() {
        Storage::Dense(a) => {
            let l = cholesky(a)?;
            let mut c = cholesky_solve(&l, y);
            // Iterative refinement against an accurately computed residual.
            let mut best = f64::INFINITY;
            for _ in 0..4 {
                let r: Vec<f64> = (0..m)
                    .map(|i| accurate_dot(a.row(i).iter().copied().zip(c.iter().copied()).chain([(-1.0, y[i])])))
                    .map(|v| -v)
                    .collect();
                let r_norm = norm(&r);
                if r_norm >= best || r_norm == 0.0 {
                    break;
                }
                best = r_norm;
                let dc = cholesky_solve(&l, &r);
                for (ci, di) in c.iter_mut().zip(dc) {
                    *ci += di;
                }
            }
            c
        }
        Storage::Sparse(s) => conjugate_gradient(|x| s.mul_vec(x), y, CG_TOLERANCE, 10 * m.max(1))?,
    };
    let ac = matrix.mul_vec(&c);
    let diff: Vec<f64> = ac.iter().zip(y).map(|(a, y)| a - y).collect();
    let y_norm = norm(y);
    let scale = if matrix.normalized() { m as f64 } else { 1.0 };
    let mut coeffs = Coefficients::new(c);
    coeffs.residual = diff.iter().fold(0.0f64, |acc, d| acc.max(d.abs())) * scale;
    coeffs.relative_residual = if y_norm > 0.0 { norm(&diff) / y_norm } else { norm(&diff) };
    Ok(coeffs)
}

/// Fits `dataset` with `kernel`: assembles the raw system and solves it.
pub fn fit(dataset: &DataSet, kernel: &Kernel) -> Result<Coefficients> {
    let a = assemble(dataset, kernel, AssembleOptions::raw())?;
    solve(&a, dataset.values())
}

/// `f(x) = sum_j c_j phi(||x - x_j||)`, skipping sites beyond the support.
pub fn evaluate(coeffs: &Coefficients, dataset: &DataSet, kernel: &Kernel, x: &[f64]) -> Result<f64> {
    if x.len() != dataset.dim() {
        return Err(InterpError::DimensionMismatch { expected: dataset.dim(), got: x.len() });
    }
    if coeffs.c.len() != dataset.len() {
        return Err(InterpError::DimensionMismatch { expected: dataset.len(), got: coeffs.c.len() });
    }
    let support = kernel.support();
    Ok(accurate_dot(dataset.sites().iter().zip(&coeffs.c).filter_map(|(site, c)| {
        let r = distance(x, site);
        (r <= support).then(|| (*c, kernel.profile(r)))
    })))
}

/// The vector `Phi(x) = [phi(||x - x_j||)]_j`.
pub fn basis_vector(dataset: &DataSet, kernel: &Kernel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != dataset.dim() {
        return Err(InterpError::DimensionMismatch { expected: dataset.dim(), got: x.len() });
    }
    Ok(dataset.sites().iter().map(|s| kernel.profile(distance(x, s))).collect())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Extreme eigenvalues and `kappa = max / min` from a full symmetric
/// eigendecomposition.
pub fn spectrum(matrix: &InterpMatrix) -> Spectrum {
    let ev = symmetric_eigenvalues(&matrix.to_dense());
    let (min, max) = (ev[0], ev[ev.len() - 1]);
    Spectrum { max, min, kappa: max / min }
}

/// Largest absolute row sum, the Gershgorin bound on the spectral radius.
pub fn gershgorin_bound(matrix: &InterpMatrix) -> f64 {
    let a = matrix.to_dense();
    (0..a.nrows()).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Measured sides of the matrix perturbation inequalities for `A` and `A + E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    /// `||A^{-1} E||_2`.
    pub ratio: f64,
    /// `||(A + E)^{-1} - A^{-1}||_2`, absent when `ratio >= 1`.
    pub inverse_change: Option<f64>,
    /// `||E||_2 ||A^{-1}||_2^2 / (1 - ratio)`, absent when `ratio >= 1`.
    pub inverse_bound: Option<f64>,
    /// `|lambda_k(A + E) - lambda_k(A)|` in sorted order; empty when either
    /// matrix is not symmetric.
    pub eigen_shifts: Vec<f64>,
    pub e_norm: f64,
    /// Roundoff allowance added to both bounds.
    pub tolerance: f64,
}

impl PerturbationReport {
    pub fn inverse_branch_skipped(&self) -> bool {
        self.inverse_change.is_none()
    }

    pub fn inverse_bound_holds(&self) -> bool {
        match (self.inverse_change, self.inverse_bound) {
            (Some(measured), Some(bound)) => measured <= bound + self.tolerance,
            _ => true,
        }
    }

    pub fn eigen_bound_holds(&self) -> bool {
        self.eigen_shifts.iter().all(|&s| s <= self.e_norm + self.tolerance)
    }

    pub fn max_eigen_shift(&self) -> f64 {
        self.eigen_shifts.iter().copied().fold(0.0, f64::max)
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() <= 1e-13 * scale
}

/// Compares the measured inverse change and eigenvalue shifts with their
/// 2-norm bounds.
pub fn perturbation_check(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<PerturbationReport> {
    let n = a.nrows();
    if a.ncols() != n || e.nrows() != n || e.ncols() != n {
        return Err(InterpError::DimensionMismatch { expected: n, got: e.nrows() });
    }
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or(InterpError::NotPositiveDefinite { index: 0, value: 0.0 })?;
    let e_norm = spectral_norm(e);
    let a_inv_norm = spectral_norm(&a_inv);
    let ratio = spectral_norm(&(&a_inv * e));
    let perturbed = a + e;
    let (inverse_change, inverse_bound) = if ratio < 1.0 {
        let p_inv = perturbed
            .clone()
            .try_inverse()
            .ok_or(InterpError::NotPositiveDefinite { index: 0, value: 0.0 })?;
        let change = spectral_norm(&(p_inv - &a_inv));
        (Some(change), Some(e_norm * a_inv_norm * a_inv_norm / (1.0 - ratio)))
    } else {
        (None, None)
    };
    let eigen_shifts = if is_symmetric(a) && is_symmetric(e) {
        symmetric_eigenvalues(&perturbed)
            .iter()
            .zip(symmetric_eigenvalues(a))
            .map(|(p, q)| (p - q).abs())
            .collect()
    } else {
        Vec::new()
    };
    let tolerance = 1e-12 * (spectral_norm(a) + e_norm + a_inv_norm);
    Ok(PerturbationReport { ratio, inverse_change, inverse_bound, eigen_shifts, e_norm, tolerance })
}
