//! Matrix-variate distributions: multivariate gamma, Wishart and matrix-F
//! densities, Bartlett-based samplers and the matrix-F moment kernel.

use alloc::format;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matalg::{commutation_matrix, kron, sqrtm_spd, symmetrize, Mat, SpdMatrix};
#[allow(unused_imports)]
use crate::num::Real;
use crate::special::ln_multigamma_unchecked;

/// Parameters of the matrix-F law `F(ν, Σ)`; `scale` is the `Σ` argument.
///
/// The density is proportional to
/// `|Σ|^{-ν1/2} |X|^{(ν1-n-1)/2} |I + Σ^{-1} X|^{-(ν1+ν2)/2}` and the mean is
/// `ν1/(ν2-n-1) Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFParams {
    nu1: f64,
    nu2: f64,
    scale: SpdMatrix,
}

impl MatrixFParams {
    pub fn new(nu1: f64, nu2: f64, scale: SpdMatrix) -> Result<Self> {
        check_matrix_f_dof(scale.dim(), nu1, nu2)?;
        Ok(MatrixFParams { nu1, nu2, scale })
    }

    /// The parameters whose mean is `mean`: `Σ = ((ν2-n-1)/ν1) mean`.
    pub fn with_mean(nu1: f64, nu2: f64, mean: &SpdMatrix) -> Result<Self> {
        let n = mean.dim();
        check_matrix_f_dof(n, nu1, nu2)?;
        let scale = mean.scaled((nu2 - n as f64 - 1.0) / nu1)?;
        Ok(MatrixFParams { nu1, nu2, scale })
    }

    pub fn n(&self) -> usize {
        self.scale.dim()
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    pub fn scale(&self) -> &SpdMatrix {
        &self.scale
    }
}

pub(crate) fn check_matrix_f_dof(n: usize, nu1: f64, nu2: f64) -> Result<()> {
    let bound = n as f64 + 1.0;
    if !(nu1 > bound) || !nu1.is_finite() {
        return Err(Error::InvalidDof(format!("nu1 = {nu1} must exceed n+1 = {bound}")));
    }
    if !(nu2 > bound) || !nu2.is_finite() {
        return Err(Error::InvalidDof(format!("nu2 = {nu2} must exceed n+1 = {bound}")));
    }
    Ok(())
}

/// Parameters of the Wishart law `W(df, scale)` with mean `df * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams {
    df: f64,
    scale: SpdMatrix,
}

impl WishartParams {
    pub fn new(df: f64, scale: SpdMatrix) -> Result<Self> {
        let bound = scale.dim() as f64 - 1.0;
        if !(df > bound) || !df.is_finite() {
            return Err(Error::InvalidDof(format!("df = {df} must exceed n-1 = {bound}")));
        }
        Ok(WishartParams { df, scale })
    }

    pub fn n(&self) -> usize {
        self.scale.dim()
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn scale(&self) -> &SpdMatrix {
        &self.scale
    }
}

/// `ln Γ_n(x)`, requiring `x > (n-1)/2`.
pub fn ln_multigamma(n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let bound = (n as f64 - 1.0) / 2.0;
    if !(x > bound) {
        return Err(Error::InvalidArgument(format!("multivariate gamma argument {x} must exceed (n-1)/2 = {bound}")));
    }
    Ok(ln_multigamma_unchecked(n, x))
}

/// Bartlett factor: lower-triangular `C` with `C C' ~ W(df, I_n)`.
fn bartlett<R: Rng + ?Sized>(n: usize, df: f64, rng: &mut R) -> Mat {
    let mut c = Mat::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(df - i as f64).expect("df checked by caller");
        c[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            c[(i, j)] = StandardNormal.sample(rng);
        }
    }
    c
}

fn standard_wishart<R: Rng + ?Sized>(n: usize, df: f64, rng: &mut R) -> Mat {
    let c = bartlett(n, df, rng);
    symmetrize(&c * c.transpose())
}

/// One Wishart draw by Bartlett decomposition; valid for real `df > n-1`.
pub fn sample_wishart<R: Rng + ?Sized>(p: &WishartParams, rng: &mut R) -> SpdMatrix {
    let n = p.n();
    let chol = p.scale.as_mat().clone().cholesky().expect("SPD scale").unpack();
    let c = &chol * bartlett(n, p.df, rng);
    let w = symmetrize(&c * c.transpose());
    // A draw that is singular to working precision has probability zero; keep
    // the SPD invariant by construction rather than re-checking.
    SpdMatrix::from_trusted(w)
}

/// One draw from `F(ν, scale)`:
/// `scale^{1/2} L^{1/2} R^{-1} L^{1/2} scale^{1/2}` with independent
/// `L ~ W(ν1, I)`, `R ~ W(ν2, I)` and symmetric square roots.
pub fn sample_matrix_f<R: Rng + ?Sized>(p: &MatrixFParams, rng: &mut R) -> Result<SpdMatrix> {
    let n = p.n();
    let root = sqrtm_spd(&p.scale)?;
    let core = standard_f_draw(n, p.nu1, p.nu2, rng)?;
    let y = symmetrize(root.as_mat() * core * root.as_mat());
    SpdMatrix::new(y)
}

/// `L^{1/2} R^{-1} L^{1/2}` with `L ~ W(ν1, I)`, `R ~ W(ν2, I)`.
pub(crate) fn standard_f_draw<R: Rng + ?Sized>(n: usize, nu1: f64, nu2: f64, rng: &mut R) -> Result<Mat> {
    let l = SpdMatrix::new(standard_wishart(n, nu1, rng))?;
    let l_root = sqrtm_spd(&l)?;
    for _ in 0..2 {
        let r = standard_wishart(n, nu2, rng);
        if let Some(chol) = r.cholesky() {
            let r_inv = chol.inverse();
            return Ok(symmetrize(l_root.as_mat() * r_inv * l_root.as_mat()));
        }
    }
    Err(Error::Singular("Wishart denominator draw singular twice".into()))
}

/// `log Λ(ν) = ln Γ_n((ν1+ν2)/2) - ln Γ_n(ν1/2) - ln Γ_n(ν2/2)`.
pub(crate) fn ln_norm_const(n: usize, nu1: f64, nu2: f64) -> f64 {
    ln_multigamma_unchecked(n, (nu1 + nu2) / 2.0)
        - ln_multigamma_unchecked(n, nu1 / 2.0)
        - ln_multigamma_unchecked(n, nu2 / 2.0)
}

fn check_dim(x: &SpdMatrix, n: usize) -> Result<()> {
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: x.dim() });
    }
    Ok(())
}

/// Log-density of `F(ν, Σ)` at `x`.
pub fn logpdf_matrix_f(x: &SpdMatrix, p: &MatrixFParams) -> Result<f64> {
    let n = p.n();
    check_dim(x, n)?;
    let sum = SpdMatrix::new(p.scale.as_mat() + x.as_mat())?;
    let ld_scale = p.scale.log_det();
    let ld_x = x.log_det();
    let ld_sum = sum.log_det();
    let (nu1, nu2) = (p.nu1, p.nu2);
    Ok(ln_norm_const(n, nu1, nu2) - nu1 / 2.0 * ld_scale + (nu1 - n as f64 - 1.0) / 2.0 * ld_x
        - (nu1 + nu2) / 2.0 * (ld_sum - ld_scale))
}

/// Mean `ν1/(ν2-n-1) Σ` of `F(ν, Σ)`.
pub fn matrix_f_mean(p: &MatrixFParams) -> Result<SpdMatrix> {
    let n = p.n() as f64;
    if !(p.nu2 > n + 1.0) {
        return Err(Error::InvalidDof(format!("mean needs nu2 = {} > n+1 = {}", p.nu2, n + 1.0)));
    }
    p.scale.scaled(p.nu1 / (p.nu2 - n - 1.0))
}

/// Standard Wishart log-density.
pub fn logpdf_wishart(x: &SpdMatrix, p: &WishartParams) -> Result<f64> {
    let n = p.n();
    check_dim(x, n)?;
    let nf = n as f64;
    let inv = p.scale.inverse();
    let tr = (inv.as_mat() * x.as_mat()).trace();
    Ok((p.df - nf - 1.0) / 2.0 * x.log_det()
        - tr / 2.0
        - p.df * nf / 2.0 * core::f64::consts::LN_2
        - p.df / 2.0 * p.scale.log_det()
        - ln_multigamma_unchecked(n, p.df / 2.0))
}

/// Second-moment factors `(s1, s2)` of the unit-mean matrix-F innovation.
///
/// For `Δ ~ F(ν, ((ν2-n-1)/ν1) I)`,
/// `E[Δ_ij Δ_kl] = s1 δ_ij δ_kl + s2 (δ_ik δ_jl + δ_il δ_jk)`.
pub fn moment_factors(n: usize, nu1: f64, nu2: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    check_matrix_f_dof(n, nu1, nu2)?;
    if !(nu2 > nf + 3.0) {
        return Err(Error::InvalidDof(format!("second moments need nu2 = {nu2} > n+3 = {}", nf + 3.0)));
    }
    let denom = nu1 * (nu2 - nf) * (nu2 - nf - 3.0);
    let s1 = (nu2 - nf - 1.0) * (nu1 * (nu2 - nf - 2.0) + 2.0) / denom;
    let s2 = (nu2 - nf - 1.0) * (nu1 + nu2 - nf - 1.0) / denom;
    Ok((s1, s2))
}

/// The `n⁴ x n⁴` kernel
/// `Π = (s1-1) I + s2 [I_{n²} ⊗ (I_{n²} + K)] [I_n ⊗ K ⊗ I_n]`.
pub fn moment_kernel(n: usize, s1: f64, s2: f64) -> Result<Mat> {
    let n2 = n * n;
    let k = commutation_matrix(n)?;
    let left = kron(&Mat::identity(n2, n2), &(Mat::identity(n2, n2) + &k));
    let right = kron(&kron(&Mat::identity(n, n), &k), &Mat::identity(n, n));
    Ok(Mat::identity(n2 * n2, n2 * n2) * (s1 - 1.0) + left * right * s2)
}
