//! CBF and CBF-HAR specifications, the conditional-mean recursion,
//! stationarity and moment formulas, persistence and path simulation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matalg::{kron, spectral_radius, sqrtm_spd, symmetrize, vec_of, Mat, MatrixSeries, SpdMatrix};
use crate::matdist::{check_matrix_f_dof, moment_factors, moment_kernel, standard_f_draw};
#[allow(unused_imports)]
use crate::num::Real;

/// Default number of discarded simulation steps.
pub const DEFAULT_BURNIN: usize = 500;

/// Coefficient structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    Full,
    Diagonal,
}

/// Innovation law of `Δ_t` (always unit mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    /// `F(ν, ((ν2-n-1)/ν1) I)`.
    MatrixF { nu1: f64, nu2: f64 },
    /// `W(df, I/df)`; the `ν2 → ∞` limit of the matrix-F case.
    Wishart { df: f64 },
}

/// Likelihood family matching an [`Innovation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    MatrixF,
    Wishart,
}

impl Innovation {
    pub fn family(&self) -> Family {
        match self {
            Innovation::MatrixF { .. } => Family::MatrixF,
            Innovation::Wishart { .. } => Family::Wishart,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Innovation::MatrixF { nu1, nu2 } => check_matrix_f_dof(n, nu1, nu2),
            Innovation::Wishart { df } => {
                let bound = n as f64 - 1.0;
                if df > bound && df.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidDof(format!("df = {df} must exceed n-1 = {bound}")))
                }
            }
        }
    }

    /// `(s1, s2)` with `E[Δ_ij Δ_kl] = s1 δ_ij δ_kl + s2 (δ_ik δ_jl + δ_il δ_jk)`.
    pub fn moment_factors(&self, n: usize) -> Result<(f64, f64)> {
        match *self {
            Innovation::MatrixF { nu1, nu2 } => moment_factors(n, nu1, nu2),
            Innovation::Wishart { df } => {
                self.validate(n)?;
                Ok((1.0, 1.0 / df))
            }
        }
    }

    /// Draws one unit-mean innovation matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Mat> {
        match *self {
            Innovation::MatrixF { nu1, nu2 } => Ok(standard_f_draw(n, nu1, nu2, rng)? * ((nu2 - n as f64 - 1.0) / nu1)),
            Innovation::Wishart { df } => {
                let p = crate::matdist::WishartParams::new(df, SpdMatrix::identity(n))?;
                Ok(crate::matdist::sample_wishart(&p, rng).into_inner() / df)
            }
        }
    }
}

/// A BEKK coefficient as used by the recursion.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Coef {
    Full(Mat),
    Diag(Vec<f64>),
}

impl Coef {
    pub(crate) fn from_mat(m: &Mat, structure: Structure) -> Coef {
        match structure {
            Structure::Full => Coef::Full(m.clone()),
            Structure::Diagonal => Coef::Diag(m.diagonal().iter().cloned().collect()),
        }
    }

    pub(crate) fn to_mat(&self) -> Mat {
        match self {
            Coef::Full(m) => m.clone(),
            Coef::Diag(d) => Mat::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        match self {
            Coef::Full(m) => m.iter().all(|x| *x == 0.0),
            Coef::Diag(d) => d.iter().all(|x| *x == 0.0),
        }
    }

    /// `C X C'`
    pub(crate) fn sandwich(&self, x: &Mat) -> Mat {
        match self {
            Coef::Full(c) => c * x * c.transpose(),
            Coef::Diag(d) => Mat::from_fn(x.nrows(), x.ncols(), |i, j| d[i] * d[j] * x[(i, j)]),
        }
    }

    /// `C ⊗ C`
    pub(crate) fn kron_square(&self) -> Mat {
        let m = self.to_mat();
        kron(&m, &m)
    }
}

/// Generic form of every supported recursion:
/// `Σ_t = Ω + Σ_a C_a X_{a,t} C_a' + Σ_g D_g Σ_{t-lag_g} D_g'`, where each
/// input `X_{a,t}` is a weighted sum of lagged observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Recursion {
    pub(crate) n: usize,
    pub(crate) omega: Mat,
    /// Input patterns: `(lag, weight)` lists.
    pub(crate) patterns: Vec<Vec<(usize, f64)>>,
    /// ARCH terms: coefficient and pattern index.
    pub(crate) arch: Vec<(Coef, usize)>,
    /// GARCH terms: coefficient and lag.
    pub(crate) garch: Vec<(Coef, usize)>,
}

impl Recursion {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest lag referenced by the recursion.
    pub fn max_lag(&self) -> usize {
        let a = self.patterns.iter().flat_map(|p| p.iter().map(|(l, _)| *l)).max().unwrap_or(0);
        let g = self.garch.iter().map(|(_, l)| *l).max().unwrap_or(0);
        a.max(g)
    }

    /// `Σ_a (Σ weights) C_a ⊗ C_a + Σ_g D_g ⊗ D_g`.
    pub fn kernel(&self) -> Mat {
        let n2 = self.n * self.n;
        let mut m = Mat::zeros(n2, n2);
        for (c, p) in &self.arch {
            let w: f64 = self.patterns[*p].iter().map(|(_, w)| w).sum();
            m += c.kron_square() * w;
        }
        for (d, _) in &self.garch {
            m += d.kron_square();
        }
        m
    }

    fn all_diagonal(&self) -> bool {
        self.arch.iter().chain(self.garch.iter()).all(|(c, _)| matches!(c, Coef::Diag(_)))
    }

    /// Diagonal of the kernel when every coefficient is diagonal.
    fn diagonal_kernel(&self) -> Option<Vec<f64>> {
        if !self.all_diagonal() {
            return None;
        }
        let n = self.n;
        let mut k = vec![0.0; n * n];
        let mut add = |d: &[f64], w: f64| {
            for j in 0..n {
                for i in 0..n {
                    k[j * n + i] += w * d[i] * d[j];
                }
            }
        };
        for (c, p) in &self.arch {
            if let Coef::Diag(d) = c {
                add(d, self.patterns[*p].iter().map(|(_, w)| w).sum());
            }
        }
        for (c, _) in &self.garch {
            if let Coef::Diag(d) = c {
                add(d, 1.0);
            }
        }
        Some(k)
    }

    /// Lag-indexed kernels: `A_j* = Σ_a w_{a,j} C_a⊗C_a`, `B_j* = Σ_g [lag_g = j] D_g⊗D_g`,
    /// for `j = 1..=max_lag` (index 0 unused).
    fn lag_kernels(&self) -> (Vec<Mat>, Vec<Mat>) {
        let m = self.max_lag();
        let n2 = self.n * self.n;
        let mut a = vec![Mat::zeros(n2, n2); m + 1];
        let mut b = vec![Mat::zeros(n2, n2); m + 1];
        for (c, p) in &self.arch {
            let kk = c.kron_square();
            for &(lag, w) in &self.patterns[*p] {
                a[lag] += &kk * w;
            }
        }
        for (d, lag) in &self.garch {
            b[*lag] += d.kron_square();
        }
        (a, b)
    }

    fn check_init(&self, init: &InitState) -> Result<()> {
        let m = self.max_lag();
        for list in [&init.y_init, &init.sigma_init] {
            if list.len() < m {
                return Err(Error::InvalidArgument(format!(
                    "initial state holds {} matrices but the recursion needs {m}",
                    list.len()
                )));
            }
            if let Some(bad) = list.iter().find(|x| x.dim() != self.n) {
                return Err(Error::DimensionMismatch { expected: self.n, actual: bad.dim() });
            }
        }
        Ok(())
    }

    /// One step: `Σ_t` given accessors for `Y_{t-l}` and `Σ_{t-l}`.
    pub(crate) fn step<'a>(&self, y_lag: impl Fn(usize) -> &'a Mat, s_lag: impl Fn(usize) -> &'a Mat) -> Mat {
        let mut s = self.omega.clone();
        for (c, p) in &self.arch {
            if c.is_zero() {
                continue;
            }
            let pat = &self.patterns[*p];
            let x = if pat.len() == 1 && pat[0].1 == 1.0 {
                c.sandwich(y_lag(pat[0].0))
            } else {
                let mut x = Mat::zeros(self.n, self.n);
                for &(lag, w) in pat {
                    x += y_lag(lag) * w;
                }
                c.sandwich(&x)
            };
            s += x;
        }
        for (d, lag) in &self.garch {
            if d.is_zero() {
                continue;
            }
            s += d.sandwich(s_lag(*lag));
        }
        symmetrize(s)
    }

    /// Runs the recursion over `ys`, then `extra` further steps in which the
    /// unobserved `Y` is replaced by its conditional mean `Σ`.
    pub(crate) fn filter(&self, ys: &[&Mat], init: &InitState, extra: usize) -> Result<Vec<Mat>> {
        self.check_init(init)?;
        let t_obs = ys.len();
        let mut sig: Vec<Mat> = Vec::with_capacity(t_obs + extra);
        for t in 1..=t_obs + extra {
            let s = {
                let y_lag = |l: usize| -> &Mat {
                    if t > l {
                        let k = t - l;
                        if k <= t_obs {
                            ys[k - 1]
                        } else {
                            &sig[k - 1]
                        }
                    } else {
                        init.y_init[l - t].as_mat()
                    }
                };
                let s_lag = |l: usize| -> &Mat {
                    if t > l {
                        &sig[t - l - 1]
                    } else {
                        init.sigma_init[l - t].as_mat()
                    }
                };
                self.step(y_lag, s_lag)
            };
            sig.push(s);
        }
        Ok(sig)
    }
}

/// Types that define a conditional-mean recursion and innovation law.
pub trait Specification {
    fn n(&self) -> usize;
    fn innovation(&self) -> Innovation;
    fn structure(&self) -> Structure;
    fn recursion(&self) -> Recursion;
}

fn check_coef(m: &Mat, n: usize, structure: Structure, name: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, actual: m.nrows().max(m.ncols()) });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
    }
    if structure == Structure::Diagonal {
        for j in 0..n {
            for i in 0..n {
                if i != j && m[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "{name} must be diagonal under the diagonal structure"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Sign-normalizes a BEKK coefficient: `C` and `-C` give the same quadratic
/// form, so the representative with a nonnegative first diagonal element is kept.
pub(crate) fn canonical_sign(m: &mut Mat) {
    if m.nrows() > 0 && m[(0, 0)] < 0.0 {
        m.neg_mut();
    }
}

/// A CBF model: orders `(P, Q, K)`, drift `Ω`, ARCH blocks `A[k][i]`
/// (lag `i+1`), GARCH blocks `B[k][j]` (lag `j+1`), innovation law and
/// coefficient structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfSpec {
    n: usize,
    p: usize,
    q: usize,
    k: usize,
    omega: SpdMatrix,
    arch: Vec<Vec<Mat>>,
    garch: Vec<Vec<Mat>>,
    innovation: Innovation,
    structure: Structure,
}

impl CbfSpec {
    /// Validates and builds a specification. Each coefficient's sign is
    /// normalized so its first diagonal element is nonnegative.
    pub fn new(
        omega: SpdMatrix,
        mut arch: Vec<Vec<Mat>>,
        mut garch: Vec<Vec<Mat>>,
        innovation: Innovation,
        structure: Structure,
    ) -> Result<Self> {
        let n = omega.dim();
        let k = arch.len().max(garch.len());
        if k == 0 {
            return Err(Error::InvalidArgument("at least one coefficient block is required".into()));
        }
        if arch.is_empty() {
            arch = vec![Vec::new(); k];
        }
        if garch.is_empty() {
            garch = vec![Vec::new(); k];
        }
        if arch.len() != k || garch.len() != k {
            return Err(Error::InvalidArgument("ARCH and GARCH blocks disagree on K".into()));
        }
        let p = arch[0].len();
        let q = garch[0].len();
        if arch.iter().any(|r| r.len() != p) || garch.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidArgument("ragged coefficient blocks".into()));
        }
        innovation.validate(n)?;
        for m in arch.iter_mut().flatten() {
            check_coef(m, n, structure, "ARCH coefficient")?;
            canonical_sign(m);
        }
        for m in garch.iter_mut().flatten() {
            check_coef(m, n, structure, "GARCH coefficient")?;
            canonical_sign(m);
        }
        Ok(CbfSpec { n, p, q, k, omega, arch, garch, innovation, structure })
    }

    /// The `P = Q = K = 1` model.
    pub fn bekk11(omega: SpdMatrix, a: Mat, b: Mat, innovation: Innovation, structure: Structure) -> Result<Self> {
        Self::new(omega, vec![vec![a]], vec![vec![b]], innovation, structure)
    }

    pub fn orders(&self) -> (usize, usize, usize) {
        (self.p, self.q, self.k)
    }

    pub fn omega(&self) -> &SpdMatrix {
        &self.omega
    }

    /// `A[k][i]`, the block for component `k` at lag `i + 1`.
    pub fn arch(&self) -> &[Vec<Mat>] {
        &self.arch
    }

    /// `B[k][j]`, the block for component `k` at lag `j + 1`.
    pub fn garch(&self) -> &[Vec<Mat>] {
        &self.garch
    }

    pub fn with_innovation(mut self, innovation: Innovation) -> Result<Self> {
        innovation.validate(self.n)?;
        self.innovation = innovation;
        Ok(self)
    }
}

impl Specification for CbfSpec {
    fn n(&self) -> usize {
        self.n
    }
    fn innovation(&self) -> Innovation {
        self.innovation
    }
    fn structure(&self) -> Structure {
        self.structure
    }
    fn recursion(&self) -> Recursion {
        let patterns = (1..=self.p).map(|i| vec![(i, 1.0)]).collect();
        let mut arch = Vec::new();
        for row in &self.arch {
            for (i, a) in row.iter().enumerate() {
                arch.push((Coef::from_mat(a, self.structure), i));
            }
        }
        let mut garch = Vec::new();
        for row in &self.garch {
            for (j, b) in row.iter().enumerate() {
                garch.push((Coef::from_mat(b, self.structure), j + 1));
            }
        }
        Recursion { n: self.n, omega: self.omega.as_mat().clone(), patterns, arch, garch }
    }
}

/// A CBF-HAR model with daily, weekly (5) and monthly (22) averages.
#[derive(Debug, Clone, PartialEq)]
pub struct HarSpec {
    n: usize,
    omega: SpdMatrix,
    a_d: Mat,
    a_w: Mat,
    a_m: Mat,
    innovation: Innovation,
    structure: Structure,
}

/// `(lag count, label)` of the three HAR averages.
pub const HAR_WINDOWS: [usize; 3] = [1, 5, 22];

impl HarSpec {
    pub fn new(
        omega: SpdMatrix,
        mut a_d: Mat,
        mut a_w: Mat,
        mut a_m: Mat,
        innovation: Innovation,
        structure: Structure,
    ) -> Result<Self> {
        let n = omega.dim();
        innovation.validate(n)?;
        for (m, name) in [(&mut a_d, "daily"), (&mut a_w, "weekly"), (&mut a_m, "monthly")] {
            check_coef(m, n, structure, name)?;
            canonical_sign(m);
        }
        Ok(HarSpec { n, omega, a_d, a_w, a_m, innovation, structure })
    }

    pub fn omega(&self) -> &SpdMatrix {
        &self.omega
    }

    /// Daily, weekly and monthly coefficients.
    pub fn coefficients(&self) -> [&Mat; 3] {
        [&self.a_d, &self.a_w, &self.a_m]
    }
}

pub(crate) fn har_patterns() -> Vec<Vec<(usize, f64)>> {
    HAR_WINDOWS.iter().map(|&w| (1..=w).map(|l| (l, 1.0 / w as f64)).collect()).collect()
}

impl Specification for HarSpec {
    fn n(&self) -> usize {
        self.n
    }
    fn innovation(&self) -> Innovation {
        self.innovation
    }
    fn structure(&self) -> Structure {
        self.structure
    }
    fn recursion(&self) -> Recursion {
        let arch = [&self.a_d, &self.a_w, &self.a_m]
            .iter()
            .enumerate()
            .map(|(i, a)| (Coef::from_mat(a, self.structure), i))
            .collect();
        Recursion { n: self.n, omega: self.omega.as_mat().clone(), patterns: har_patterns(), arch, garch: Vec::new() }
    }
}

/// Either supported specification.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySpec {
    Cbf(CbfSpec),
    Har(HarSpec),
}

impl Specification for AnySpec {
    fn n(&self) -> usize {
        match self {
            AnySpec::Cbf(s) => s.n(),
            AnySpec::Har(s) => s.n(),
        }
    }
    fn innovation(&self) -> Innovation {
        match self {
            AnySpec::Cbf(s) => s.innovation(),
            AnySpec::Har(s) => s.innovation(),
        }
    }
    fn structure(&self) -> Structure {
        match self {
            AnySpec::Cbf(s) => s.structure(),
            AnySpec::Har(s) => s.structure(),
        }
    }
    fn recursion(&self) -> Recursion {
        match self {
            AnySpec::Cbf(s) => s.recursion(),
            AnySpec::Har(s) => s.recursion(),
        }
    }
}

impl From<CbfSpec> for AnySpec {
    fn from(s: CbfSpec) -> Self {
        AnySpec::Cbf(s)
    }
}

impl From<HarSpec> for AnySpec {
    fn from(s: HarSpec) -> Self {
        AnySpec::Har(s)
    }
}

/// Pre-sample values: `y_init[0]` is `Y_0`, `y_init[1]` is `Y_{-1}`, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct InitState {
    pub y_init: Vec<SpdMatrix>,
    pub sigma_init: Vec<SpdMatrix>,
}

impl InitState {
    pub fn new(y_init: Vec<SpdMatrix>, sigma_init: Vec<SpdMatrix>) -> Result<Self> {
        if y_init.len() != sigma_init.len() {
            return Err(Error::InvalidArgument("initial Y and Σ lists differ in length".into()));
        }
        if let Some(first) = y_init.first() {
            let n = first.dim();
            if let Some(bad) = y_init.iter().chain(sigma_init.iter()).find(|m| m.dim() != n) {
                return Err(Error::DimensionMismatch { expected: n, actual: bad.dim() });
            }
        }
        Ok(InitState { y_init, sigma_init })
    }

    /// Every pre-sample `Y` and `Σ` equal to `value`.
    pub fn constant(value: &SpdMatrix, lags: usize) -> Self {
        InitState { y_init: vec![value.clone(); lags], sigma_init: vec![value.clone(); lags] }
    }

    /// Estimation default: every pre-sample matrix is the sample mean.
    pub fn from_series_mean(series: &MatrixSeries, lags: usize) -> Self {
        Self::constant(&series.mean(), lags)
    }

    pub fn lags(&self) -> usize {
        self.y_init.len()
    }
}

fn check_series(n: usize, series: &MatrixSeries) -> Result<()> {
    if series.n() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: series.n() });
    }
    Ok(())
}

fn to_spd_path(path: Vec<Mat>) -> Result<Vec<SpdMatrix>> {
    path.into_iter().map(SpdMatrix::new).collect()
}

pub(crate) fn filter_series(
    rec: &Recursion,
    series: &MatrixSeries,
    init: &InitState,
    extra: usize,
) -> Result<Vec<Mat>> {
    check_series(rec.n, series)?;
    let ys: Vec<&Mat> = series.iter().map(|y| y.as_mat()).collect();
    rec.filter(&ys, init, extra)
}

/// `Σ_t` for `t = 1..=T`.
pub fn sigma_path(spec: &CbfSpec, series: &MatrixSeries, init: &InitState) -> Result<Vec<SpdMatrix>> {
    to_spd_path(filter_series(&spec.recursion(), series, init, 0)?)
}

/// `Σ_t` for `t = 1..=T` under the HAR recursion.
pub fn har_sigma_path(spec: &HarSpec, series: &MatrixSeries, init: &InitState) -> Result<Vec<SpdMatrix>> {
    to_spd_path(filter_series(&spec.recursion(), series, init, 0)?)
}

/// `Σ_t` for any specification.
pub fn spec_sigma_path<S: Specification + ?Sized>(
    spec: &S,
    series: &MatrixSeries,
    init: &InitState,
) -> Result<Vec<SpdMatrix>> {
    to_spd_path(filter_series(&spec.recursion(), series, init, 0)?)
}

/// The equivalent constrained CBF model with `P = 22`, `K = 3`, `Q = 0`.
pub fn har_expand(spec: &HarSpec) -> CbfSpec {
    let n = spec.n;
    let zero = Mat::zeros(n, n);
    let arch = [&spec.a_d, &spec.a_w, &spec.a_m]
        .iter()
        .zip(HAR_WINDOWS)
        .map(|(a, w)| {
            let scaled = *a / (w as f64).sqrt();
            (0..22).map(|i| if i < w { scaled.clone() } else { zero.clone() }).collect()
        })
        .collect();
    CbfSpec {
        n,
        p: 22,
        q: 0,
        k: 3,
        omega: spec.omega.clone(),
        arch,
        garch: vec![Vec::new(); 3],
        innovation: spec.innovation,
        structure: spec.structure,
    }
}

/// Spectral radius of the mean kernel and whether it is below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub rho: f64,
    pub stationary: bool,
}

/// `ρ(Σ_i (A_i* + B_i*))` with `A_i* = Σ_k A_ki ⊗ A_ki`; stationary iff `ρ < 1`.
pub fn check_stationarity<S: Specification + ?Sized>(spec: &S) -> Stationarity {
    stationarity_of(&spec.recursion())
}

pub(crate) fn stationarity_of(rec: &Recursion) -> Stationarity {
    let rho = match rec.diagonal_kernel() {
        Some(d) => d.iter().map(|x| x.abs()).fold(0.0, f64::max),
        // the kernel of a valid spec is square, so only a Schur failure can surface
        None => spectral_radius(&rec.kernel()).unwrap_or(f64::INFINITY),
    };
    Stationarity { rho, stationary: rho < 1.0 }
}

/// `E(Y_t)`, solving `(I - Σ(A* + B*)) vec ȳ = vec Ω`.
pub fn unconditional_mean<S: Specification + ?Sized>(spec: &S) -> Result<SpdMatrix> {
    unconditional_mean_of(&spec.recursion())
}

pub(crate) fn unconditional_mean_of(rec: &Recursion) -> Result<SpdMatrix> {
    let st = stationarity_of(rec);
    if !st.stationary {
        return Err(Error::NonStationary(st.rho));
    }
    let n = rec.n;
    let mean = match rec.diagonal_kernel() {
        Some(d) => Mat::from_fn(n, n, |i, j| rec.omega[(i, j)] / (1.0 - d[j * n + i])),
        None => {
            let lhs = Mat::identity(n * n, n * n) - rec.kernel();
            let rhs = nalgebra::DVector::from_vec(vec_of(&rec.omega));
            let sol = lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular("I minus mean kernel".into()))?;
            Mat::from_column_slice(n, n, sol.as_slice())
        }
    };
    SpdMatrix::new(symmetrize(mean))
}

/// Default truncation tolerance for [`second_moment`].
pub const SECOND_MOMENT_TOL: f64 = 1e-12;
const SECOND_MOMENT_CAP: usize = 10_000;

/// `E[vec(Y) vec(Y)']` (an `n² x n²` matrix) from
/// `vec E = (Π + I)(I - Σ_i (Φ_i⊗Φ_i) Π)^{-1} (vec ȳ ⊗ vec ȳ)`.
///
/// The `Φ_i` series is truncated once `max_lag` consecutive terms have
/// norm at most `tol · ‖Φ_0‖`.
pub fn second_moment<S: Specification + ?Sized>(spec: &S, tol: f64) -> Result<Mat> {
    let rec = spec.recursion();
    let n = rec.n;
    let (s1, s2) = spec.innovation().moment_factors(n)?;
    let mean = unconditional_mean_of(&rec)?;
    let n2 = n * n;
    let (a_star, b_star) = rec.lag_kernels();
    let m = rec.max_lag().max(1);
    let phi0 = Mat::identity(n2, n2);
    let phi0_norm = phi0.norm();
    let mut phis: Vec<Mat> = vec![phi0];
    let mut sum = Mat::zeros(n2 * n2, n2 * n2);
    let mut small_run = 0;
    let mut i = 1;
    loop {
        if i > SECOND_MOMENT_CAP {
            return Err(Error::Divergent(format!("Φ series still above tolerance after {SECOND_MOMENT_CAP} terms")));
        }
        let mut phi = if i < b_star.len() { -&b_star[i] } else { Mat::zeros(n2, n2) };
        for j in 1..=i.min(a_star.len() - 1) {
            phi += (&a_star[j] + &b_star[j]) * &phis[i - j];
        }
        let norm = phi.norm();
        if !norm.is_finite() {
            return Err(Error::Divergent("Φ series overflowed".into()));
        }
        sum += kron(&phi, &phi);
        small_run = if norm <= tol * phi0_norm { small_run + 1 } else { 0 };
        phis.push(phi);
        if small_run >= m {
            break;
        }
        i += 1;
    }
    let pi = moment_kernel(n, s1, s2)?;
    let big = Mat::identity(n2 * n2, n2 * n2);
    let op = &sum * &pi;
    let rho = spectral_radius(&op)?;
    if rho >= 1.0 {
        return Err(Error::Divergent(format!("second-moment operator has spectral radius {rho}")));
    }
    let ybar = vec_of(mean.as_mat());
    let yy = kron(&Mat::from_column_slice(n2, 1, &ybar), &Mat::from_column_slice(n2, 1, &ybar));
    let inner = (&big - op).lu().solve(&yy).ok_or_else(|| Error::Singular("second-moment operator".into()))?;
    let out = (pi + big) * inner;
    Ok(symmetrize(Mat::from_column_slice(n2, n2, out.as_slice())))
}

/// Persistence of asset `s`: `Σ (weight) c_ss²` over all ARCH and GARCH
/// coefficients, e.g. `A_d,ss² + A_w,ss² + A_m,ss²` for HAR.
pub fn persistence<S: Specification + ?Sized>(spec: &S, s: usize) -> Result<f64> {
    if spec.structure() != Structure::Diagonal {
        return Err(Error::InvalidArgument("persistence needs the diagonal structure".into()));
    }
    let rec = spec.recursion();
    if s >= rec.n {
        return Err(Error::InvalidArgument(format!("asset index {s} out of range for n = {}", rec.n)));
    }
    let coef_ss = |c: &Coef| match c {
        Coef::Diag(d) => d[s],
        Coef::Full(m) => m[(s, s)],
    };
    let mut total = 0.0;
    for (c, p) in &rec.arch {
        let w: f64 = rec.patterns[*p].iter().map(|(_, w)| w).sum();
        total += w * coef_ss(c).powi(2);
    }
    for (c, _) in &rec.garch {
        total += coef_ss(c).powi(2);
    }
    Ok(total)
}

/// Simulates `T` observations after `burnin` discarded steps, with
/// `Y_t = Σ_t^{1/2} Δ_t Σ_t^{1/2}`.
///
/// The pre-sample state is the unconditional mean for stationary specs and
/// `Ω` otherwise; non-stationary specs are simulated all the same.
pub fn simulate<S: Specification + ?Sized, R: Rng + ?Sized>(
    spec: &S,
    t: usize,
    burnin: usize,
    rng: &mut R,
) -> Result<MatrixSeries> {
    if t == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let rec = spec.recursion();
    let innovation = spec.innovation();
    let n = rec.n;
    let start = unconditional_mean_of(&rec).unwrap_or_else(|_| SpdMatrix::from_trusted(rec.omega.clone()));
    let lags = rec.max_lag();
    let init = InitState::constant(&start, lags);
    let total = t + burnin;
    let mut ys: Vec<Mat> = Vec::with_capacity(total);
    let mut sig: Vec<Mat> = Vec::with_capacity(total);
    for step in 1..=total {
        let s = {
            let y_lag = |l: usize| -> &Mat {
                if step > l {
                    &ys[step - l - 1]
                } else {
                    init.y_init[l - step].as_mat()
                }
            };
            let s_lag = |l: usize| -> &Mat {
                if step > l {
                    &sig[step - l - 1]
                } else {
                    init.sigma_init[l - step].as_mat()
                }
            };
            rec.step(y_lag, s_lag)
        };
        let root = sqrtm_spd(&SpdMatrix::new(s.clone())?)?;
        let delta = innovation.sample(n, rng)?;
        let y = symmetrize(root.as_mat() * delta * root.as_mat());
        ys.push(y);
        sig.push(s);
    }
    let data = ys.into_iter().skip(burnin).map(SpdMatrix::new).collect::<Result<Vec<_>>>()?;
    MatrixSeries::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn diag(d: &[f64]) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_column_slice(d))
    }

    fn scalar(x: f64) -> SpdMatrix {
        SpdMatrix::from_diagonal(&[x]).unwrap()
    }

    pub(crate) fn design_omega() -> SpdMatrix {
        SpdMatrix::new(Mat::from_row_slice(3, 3, &[0.5, 0.2, 0.3, 0.2, 0.5, 0.25, 0.3, 0.25, 0.5])).unwrap()
    }

    fn design_spec() -> CbfSpec {
        CbfSpec::bekk11(
            design_omega(),
            diag(&[0.4, 0.55, 0.5]),
            diag(&[0.4, 0.3, 0.5]),
            Innovation::MatrixF { nu1: 10.0, nu2: 8.0 },
            Structure::Diagonal,
        )
        .unwrap()
    }

    fn random_series(n: usize, t: usize, seed: u64) -> MatrixSeries {
        let mut rng = stream(seed, 0);
        let data = (0..t)
            .map(|_| {
                let a = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
                SpdMatrix::new(&a * a.transpose() + Mat::identity(n, n) * 0.2).unwrap()
            })
            .collect();
        MatrixSeries::new(data).unwrap()
    }

    #[test]
    fn zero_dynamics_give_omega() {
        let spec = CbfSpec::bekk11(
            design_omega(),
            Mat::zeros(3, 3),
            Mat::zeros(3, 3),
            Innovation::MatrixF { nu1: 10.0, nu2: 8.0 },
            Structure::Full,
        )
        .unwrap();
        let series = random_series(3, 20, 1);
        let init = InitState::from_series_mean(&series, 1);
        for s in sigma_path(&spec, &series, &init).unwrap() {
            assert_eq!(s.as_mat(), design_omega().as_mat());
        }
        assert_eq!(unconditional_mean(&spec).unwrap(), design_omega());
    }

    #[test]
    fn scalar_hand_recursion() {
        let spec = CbfSpec::bekk11(
            scalar(0.5),
            diag(&[0.4]),
            diag(&[0.3]),
            Innovation::MatrixF { nu1: 10.0, nu2: 8.0 },
            Structure::Diagonal,
        )
        .unwrap();
        let series = MatrixSeries::new(vec![scalar(1.0); 3]).unwrap();
        let init = InitState::constant(&scalar(1.0), 1);
        let path = sigma_path(&spec, &series, &init).unwrap();
        assert_relative_eq!(path[0][(0, 0)], 0.75, epsilon = 1e-15);
        assert_relative_eq!(path[1][(0, 0)], 0.5 + 0.16 + 0.09 * 0.75, epsilon = 1e-15);
        assert_relative_eq!(unconditional_mean(&spec).unwrap()[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sign_is_canonicalized() {
        let spec = CbfSpec::bekk11(
            scalar(0.5),
            diag(&[-0.4]),
            diag(&[0.3]),
            Innovation::MatrixF { nu1: 10.0, nu2: 8.0 },
            Structure::Diagonal,
        )
        .unwrap();
        assert_eq!(spec.arch()[0][0][(0, 0)], 0.4);
    }

    #[test]
    fn invalid_specs_rejected() {
        let off = Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.3]);
        let om = SpdMatrix::identity(2);
        assert!(CbfSpec::bekk11(
            om.clone(),
            off.clone(),
            Mat::zeros(2, 2),
            Innovation::Wishart { df: 5.0 },
            Structure::Diagonal
        )
        .is_err());
        assert!(CbfSpec::bekk11(om.clone(), off, Mat::zeros(2, 2), Innovation::Wishart { df: 5.0 }, Structure::Full)
            .is_ok());
        assert!(CbfSpec::bekk11(
            om.clone(),
            Mat::zeros(3, 3),
            Mat::zeros(2, 2),
            Innovation::Wishart { df: 5.0 },
            Structure::Full
        )
        .is_err());
        assert!(matches!(
            CbfSpec::bekk11(
                om,
                Mat::zeros(2, 2),
                Mat::zeros(2, 2),
                Innovation::MatrixF { nu1: 2.5, nu2: 8.0 },
                Structure::Full
            ),
            Err(Error::InvalidDof(_))
        ));
    }

    #[test]
    fn har_reductions() {
        let n = 2;
        let om = SpdMatrix::identity(n);
        let a_d = diag(&[0.5, 0.4]);
        let inn = Innovation::MatrixF { nu1: 10.0, nu2: 8.0 };
        let har = HarSpec::new(om.clone(), a_d.clone(), Mat::zeros(n, n), Mat::zeros(n, n), inn, Structure::Diagonal)
            .unwrap();
        let bekk = CbfSpec::new(om, vec![vec![a_d]], vec![], inn, Structure::Diagonal).unwrap();
        let series = random_series(n, 40, 2);
        let init = InitState::from_series_mean(&series, 22);
        let a = har_sigma_path(&har, &series, &init).unwrap();
        let b = sigma_path(&bekk, &series, &init).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.as_mat(), y.as_mat(), epsilon = 1e-15);
        }
    }

    #[test]
    fn har_constant_series() {
        let c = design_omega();
        let har = HarSpec::new(
            design_omega(),
            diag(&[0.3, 0.2, 0.1]),
            diag(&[0.2, 0.2, 0.2]),
            diag(&[0.1, 0.3, 0.2]),
            Innovation::Wishart { df: 6.0 },
            Structure::Diagonal,
        )
        .unwrap();
        let series = MatrixSeries::new(vec![c.clone(); 30]).unwrap();
        let init = InitState::constant(&c, 22);
        let expected =
            har.recursion().arch.iter().fold(c.as_mat().clone(), |acc, (coef, _)| acc + coef.sandwich(c.as_mat()));
        for s in har_sigma_path(&har, &series, &init).unwrap() {
            assert_relative_eq!(s.as_mat(), &expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn har_expand_weights() {
        let inn = Innovation::MatrixF { nu1: 10.0, nu2: 8.0 };
        let har = HarSpec::new(scalar(1.0), Mat::zeros(1, 1), diag(&[1.0]), Mat::zeros(1, 1), inn, Structure::Diagonal)
            .unwrap();
        let e = har_expand(&har);
        assert_eq!(e.orders(), (22, 0, 3));
        for i in 0..22 {
            assert_eq!(e.arch()[0][i][(0, 0)], 0.0);
            let w = e.arch()[1][i][(0, 0)];
            if i < 5 {
                assert_relative_eq!(w * w, 0.2, epsilon = 1e-15);
            } else {
                assert_eq!(w, 0.0);
            }
        }
        let zero =
            HarSpec::new(scalar(1.0), Mat::zeros(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1), inn, Structure::Diagonal)
                .unwrap();
        assert!(har_expand(&zero).arch().iter().flatten().all(|a| a.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn stationarity_examples() {
        let st = check_stationarity(&design_spec());
        assert_relative_eq!(st.rho, 0.5, epsilon = 1e-12);
        assert!(st.stationary);
        let inn = Innovation::MatrixF { nu1: 10.0, nu2: 8.0 };
        let unit =
            CbfSpec::bekk11(SpdMatrix::identity(3), Mat::identity(3, 3), Mat::zeros(3, 3), inn, Structure::Diagonal)
                .unwrap();
        let st = check_stationarity(&unit);
        assert_eq!(st.rho, 1.0);
        assert!(!st.stationary);
        assert!(matches!(unconditional_mean(&unit), Err(Error::NonStationary(_))));
        let zero =
            CbfSpec::bekk11(SpdMatrix::identity(3), Mat::zeros(3, 3), Mat::zeros(3, 3), inn, Structure::Full).unwrap();
        assert_eq!(check_stationarity(&zero).rho, 0.0);
        // same kernel through the full-matrix path
        let full =
            CbfSpec::bekk11(design_omega(), diag(&[0.4, 0.55, 0.5]), diag(&[0.4, 0.3, 0.5]), inn, Structure::Full)
                .unwrap();
        assert_relative_eq!(check_stationarity(&full).rho, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn explosive_har_design() {
        let har = HarSpec::new(
            design_omega(),
            diag(&[0.7, 0.65, 0.75]),
            diag(&[0.6, 0.6, 0.55]),
            diag(&[0.4, 0.45, 0.4]),
            Innovation::MatrixF { nu1: 20.0, nu2: 10.0 },
            Structure::Diagonal,
        )
        .unwrap();
        assert_relative_eq!(check_stationarity(&har).rho, 1.025, epsilon = 1e-12);
    }

    #[test]
    fn scalar_second_moment_closed_form() {
        // y = σ δ, σ_t = ω + a² y_{t-1} + b² σ_{t-1}
        let (om, a, b) = (0.5, 0.4, 0.3);
        for inn in [Innovation::MatrixF { nu1: 10.0, nu2: 9.0 }, Innovation::Wishart { df: 7.0 }] {
            let spec = CbfSpec::bekk11(scalar(om), diag(&[a]), diag(&[b]), inn, Structure::Diagonal).unwrap();
            let (s1, s2) = inn.moment_factors(1).unwrap();
            let m2 = s1 + 2.0 * s2;
            let (a2, b2) = (a * a, b * b);
            let mu = om / (1.0 - a2 - b2);
            let es2 = (om * om + 2.0 * om * (a2 + b2) * mu) / (1.0 - a2 * a2 * m2 - 2.0 * a2 * b2 - b2 * b2);
            let got = second_moment(&spec, SECOND_MOMENT_TOL).unwrap();
            assert_relative_eq!(got[(0, 0)], m2 * es2, max_relative = 1e-10);
        }
    }

    #[test]
    fn second_moment_symmetries() {
        let spec = design_spec();
        let m = second_moment(&spec, SECOND_MOMENT_TOL).unwrap();
        let n = 3;
        assert_eq!(m, m.transpose());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = m[(j * n + i, l * n + k)];
                        assert_relative_eq!(v, m[(i * n + j, l * n + k)], max_relative = 1e-10);
                        assert_relative_eq!(v, m[(j * n + i, k * n + l)], max_relative = 1e-10);
                    }
                }
            }
        }
        let bad = spec.clone().with_innovation(Innovation::MatrixF { nu1: 10.0, nu2: 5.5 }).unwrap();
        assert!(matches!(second_moment(&bad, SECOND_MOMENT_TOL), Err(Error::InvalidDof(_))));
    }

    #[test]
    fn persistence_of_estimated_models() {
        let inn = Innovation::MatrixF { nu1: 20.0, nu2: 10.0 };
        let vt = CbfSpec::new(
            scalar(0.1),
            vec![vec![diag(&[0.7207]), diag(&[0.5358]), diag(&[0.0117])]],
            vec![vec![diag(&[0.4129])]],
            inn,
            Structure::Diagonal,
        )
        .unwrap();
        assert_eq!(format!("{:.4}", persistence(&vt, 0).unwrap()), "0.9771");
        let har =
            HarSpec::new(scalar(0.1), diag(&[0.6954]), diag(&[0.5735]), diag(&[0.3891]), inn, Structure::Diagonal)
                .unwrap();
        assert_eq!(format!("{:.4}", persistence(&har, 0).unwrap()), "0.9639");
        let zero = CbfSpec::bekk11(scalar(0.1), diag(&[0.0]), diag(&[0.0]), inn, Structure::Diagonal).unwrap();
        assert_eq!(persistence(&zero, 0).unwrap(), 0.0);
        let full = CbfSpec::bekk11(scalar(0.1), diag(&[0.1]), diag(&[0.1]), inn, Structure::Full).unwrap();
        assert!(persistence(&full, 0).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = design_spec();
        let a = simulate(&spec, 50, 20, &mut stream(5, 1)).unwrap();
        let b = simulate(&spec, 50, 20, &mut stream(5, 1)).unwrap();
        let c = simulate(&spec, 50, 20, &mut stream(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
        assert!(simulate(&spec, 0, 20, &mut stream(5, 1)).is_err());
    }

    #[test]
    fn iid_simulation_mean() {
        let spec = CbfSpec::bekk11(
            design_omega(),
            Mat::zeros(3, 3),
            Mat::zeros(3, 3),
            Innovation::MatrixF { nu1: 60.0, nu2: 60.0 },
            Structure::Full,
        )
        .unwrap();
        let series = simulate(&spec, 20_000, 0, &mut stream(9, 0)).unwrap();
        let mean = series.mean();
        assert_relative_eq!(mean.as_mat(), design_omega().as_mat(), epsilon = 0.01);
    }

    fn gelfand_radius(m: &Mat) -> f64 {
        // ‖M^(2^k)‖^(1/2^k) with rescaling to avoid overflow
        let mut p = m.clone();
        let mut log_scale = 0.0;
        let mut k = 1.0;
        for _ in 0..40 {
            let nrm = p.norm();
            if nrm == 0.0 {
                return 0.0;
            }
            p /= nrm;
            log_scale += nrm.ln() / k;
            p = &p * &p;
            k *= 2.0;
        }
        (log_scale + p.norm().ln() / k).exp()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn har_matches_expansion(
            coefs in proptest::collection::vec(-0.6f64..0.6, 27),
            seed in 0u64..1000,
            full in proptest::bool::ANY,
        ) {
            let n = 3;
            let structure = if full { Structure::Full } else { Structure::Diagonal };
            let make = |k: usize| {
                let c = &coefs[k * 9..(k + 1) * 9];
                match structure {
                    Structure::Full => Mat::from_column_slice(n, n, c),
                    Structure::Diagonal => diag(&c[..3]),
                }
            };
            let har = HarSpec::new(design_omega(), make(0), make(1), make(2), Innovation::Wishart { df: 5.0 }, structure).unwrap();
            let series = random_series(n, 60, seed);
            let init = InitState::from_series_mean(&series, 22);
            let a = har_sigma_path(&har, &series, &init).unwrap();
            let b = sigma_path(&har_expand(&har), &series, &init).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.as_mat() - y.as_mat()).norm() < 1e-12);
            }
        }

        #[test]
        fn diagonal_radius_closed_form(a in proptest::collection::vec(0.0f64..0.8, 3), b in proptest::collection::vec(0.0f64..0.8, 3)) {
            let spec = CbfSpec::bekk11(design_omega(), diag(&a), diag(&b), Innovation::Wishart { df: 5.0 }, Structure::Diagonal).unwrap();
            let mut best: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    best = best.max(a[i] * a[j] + b[i] * b[j]);
                }
            }
            prop_assert!((check_stationarity(&spec).rho - best).abs() < 1e-12);
        }

        #[test]
        fn full_radius_matches_gelfand(a in proptest::collection::vec(-0.5f64..0.5, 9), b in proptest::collection::vec(-0.5f64..0.5, 9)) {
            let spec = CbfSpec::bekk11(
                design_omega(),
                Mat::from_column_slice(3, 3, &a),
                Mat::from_column_slice(3, 3, &b),
                Innovation::Wishart { df: 5.0 },
                Structure::Full,
            ).unwrap();
            let rho = check_stationarity(&spec).rho;
            let oracle = gelfand_radius(&spec.recursion().kernel());
            prop_assert!((rho - oracle).abs() < 1e-8 * (1.0 + rho), "{} vs {}", rho, oracle);
        }

        #[test]
        fn har_expansion_preserves_stationarity(d in proptest::collection::vec(0.0f64..0.8, 9)) {
            let har = HarSpec::new(
                design_omega(), diag(&d[0..3]), diag(&d[3..6]), diag(&d[6..9]),
                Innovation::Wishart { df: 5.0 }, Structure::Diagonal,
            ).unwrap();
            // direct kernel: Σ over the three averages of A⊗A
            let direct = [0, 1, 2].iter().map(|k| {
                let c = diag(&d[3 * k..3 * k + 3]);
                kron(&c, &c)
            }).fold(Mat::zeros(9, 9), |acc, m| acc + m);
            let direct_rho = spectral_radius(&direct).unwrap();
            let expanded = check_stationarity(&har_expand(&har));
            prop_assert!((expanded.rho - direct_rho).abs() < 1e-12);
            prop_assert_eq!(expanded.stationary, direct_rho < 1.0);
        }
    }
}
