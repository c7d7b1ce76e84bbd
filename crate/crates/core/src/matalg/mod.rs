//! Dense symmetric / SPD linear algebra and the vec / vech / Kronecker
//! operator calculus.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, Schur, SymmetricEigen};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::num::Real;

pub(crate) mod small;

/// Dense column-major matrix used throughout the crate.
pub type Mat = DMatrix<f64>;

/// Relative asymmetry tolerated on input before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric positive-definite matrix.
///
/// Construction symmetrizes the input as `(M + M')/2` and then requires a
/// successful Cholesky factorization; nothing is clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Mat);

impl SpdMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        let m = symmetrize_checked(m)?;
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        if m.clone().cholesky().is_none() || m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eigenvalue(&m) });
        }
        Ok(SpdMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Mat::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Mat::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    /// Builds from the lower triangle stacked column by column.
    pub fn from_vech(v: &[f64], n: usize) -> Result<Self> {
        Self::new(unvech(v, n)?)
    }

    /// Wraps a matrix that is already exactly symmetric and known to be SPD.
    pub(crate) fn from_trusted(m: Mat) -> Self {
        debug_assert!(m.is_square());
        SpdMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    pub fn log_det(&self) -> f64 {
        let l = self.0.clone().cholesky().expect("SPD invariant").l();
        2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let inv = self.0.clone().cholesky().expect("SPD invariant").inverse();
        SpdMatrix(symmetrize(inv))
    }

    /// `c * self` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale factor {c} must be positive")));
        }
        Ok(SpdMatrix(&self.0 * c))
    }

    pub fn vech(&self) -> Vec<f64> {
        vech_unchecked(&self.0)
    }
}

impl Deref for SpdMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

impl From<SpdMatrix> for Mat {
    fn from(s: SpdMatrix) -> Mat {
        s.0
    }
}

/// Ordered series of SPD matrices of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    n: usize,
    data: Vec<SpdMatrix>,
}

impl MatrixSeries {
    pub fn new(data: Vec<SpdMatrix>) -> Result<Self> {
        let first =
            data.first().ok_or_else(|| Error::InvalidArgument("series must hold at least one matrix".into()))?;
        let n = first.dim();
        if let Some(bad) = data.iter().find(|m| m.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.dim() });
        }
        Ok(MatrixSeries { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, t: usize) -> &SpdMatrix {
        &self.data[t]
    }

    pub fn as_slice(&self) -> &[SpdMatrix] {
        &self.data
    }

    pub fn iter(&self) -> core::slice::Iter<'_, SpdMatrix> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<SpdMatrix> {
        self.data
    }

    /// Sub-series `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> Result<MatrixSeries> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "window [{start}, {end}) outside series of length {}",
                self.len()
            )));
        }
        Ok(MatrixSeries { n: self.n, data: self.data[start..end].to_vec() })
    }

    /// Sample mean `(1/T) sum Y_t`.
    pub fn mean(&self) -> SpdMatrix {
        let mut acc = Mat::zeros(self.n, self.n);
        for y in &self.data {
            acc += y.as_mat();
        }
        acc /= self.data.len() as f64;
        SpdMatrix::from_trusted(symmetrize(acc))
    }
}

/// `(M + M')/2`.
pub fn symmetrize(m: Mat) -> Mat {
    let t = m.transpose();
    (m + t) * 0.5
}

fn symmetrize_checked(m: Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let scale = m.norm();
    let asym = (&m - m.transpose()).norm();
    if scale > 0.0 && asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym / scale });
    }
    Ok(symmetrize(m))
}

fn min_eigenvalue(m: &Mat) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Lower triangle stacked column by column.
pub fn vech(m: &Mat) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(vech_unchecked(m))
}

pub(crate) fn vech_unchecked(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vech`]: the symmetric matrix whose lower triangle is `v`.
pub fn unvech(v: &[f64], n: usize) -> Result<Mat> {
    let expected = n * (n + 1) / 2;
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: v.len() });
    }
    let mut m = Mat::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            m[(i, j)] = v[idx];
            m[(j, i)] = v[idx];
            idx += 1;
        }
    }
    Ok(m)
}

/// Column stacking.
pub fn vec_of(m: &Mat) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Inverse of [`vec_of`] for an `rows x cols` matrix.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, actual: v.len() });
    }
    Ok(Mat::from_column_slice(rows, cols, v))
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    let mut out = Mat::zeros(p * r, q * s);
    for j in 0..q {
        for i in 0..p {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for l in 0..s {
                for k in 0..r {
                    out[(i * r + k, j * s + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The `n² x n²` permutation `K` with `K vec(A) = vec(A')` for every `n x n` matrix `A`.
pub fn commutation_matrix(n: usize) -> Result<Mat> {
    if n < 1 {
        return Err(Error::InvalidArgument("commutation matrix needs n >= 1".into()));
    }
    let mut k = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            k[(j * n + i, i * n + j)] = 1.0;
        }
    }
    Ok(k)
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eigen_desc(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

fn spectral_function(m: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<SpdMatrix> {
    let eig = SymmetricEigen::new(m.as_mat().clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let v = &eig.eigenvectors;
    let d = Mat::from_diagonal(&eig.eigenvalues.map(f));
    Ok(SpdMatrix::from_trusted(symmetrize(v * d * v.transpose())))
}

/// Symmetric square root `S` with `S S = M`, via the eigendecomposition.
pub fn sqrtm_spd(m: &SpdMatrix) -> Result<SpdMatrix> {
    spectral_function(m, |x| x.sqrt())
}

/// Symmetric inverse square root `M^{-1/2}`.
pub fn inv_sqrtm_spd(m: &SpdMatrix) -> Result<SpdMatrix> {
    spectral_function(m, |x| 1.0 / x.sqrt())
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    if m == &m.transpose() {
        let eig = SymmetricEigen::new(m.clone());
        return Ok(eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Divergent("Schur iteration for spectral radius".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re * z.re + z.im * z.im).sqrt()).fold(0.0, f64::max))
}

/// Matrix norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `sqrt(tr(M'M))`
    Frobenius,
    /// `sqrt(rho(M'M))`
    Spectral,
}

pub fn mat_norm(m: &Mat, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => m.norm(),
        NormKind::Spectral => {
            if m.is_empty() {
                return 0.0;
            }
            let mtm = symmetrize(m.transpose() * m);
            let eig = SymmetricEigen::new(mtm);
            eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
        }
    }
}
