//! Likelihood evaluation, full maximum likelihood, the two-step
//! variance-targeted estimator and their asymptotic covariances.
//!
//! The objective is the average negative log-likelihood
//! `(1/T) Σ l_t(θ)`. Gradients are analytic by default (reverse sweep through
//! the recursion); Hessians are central differences of that gradient.

mod engine;
mod layout;
mod optim;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;

pub use layout::{ModelShape, Orders, ParamVector};

pub(crate) use engine::{sigma_flat, Data, Drift};

use crate::error::{Error, Result};
use crate::matalg::{symmetrize, vec_of, Mat, MatrixSeries, SpdMatrix};
use crate::model::{AnySpec, Family, InitState, Structure};
#[allow(unused_imports)]
use crate::num::Real;
use crate::rng;

/// How the optimizer obtains first derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Reverse-mode derivative of the recursion.
    Analytic,
    /// Central differences of the scalar objective.
    FiniteDifference,
}

/// Optimizer and covariance settings.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Relative gradient tolerance `‖∇‖∞ <= tol · max(1, |f|)` in the
    /// unconstrained coordinates.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Jittered restarts, used only while no run has converged.
    pub restarts: usize,
    pub seed: u64,
    /// Require `T > min_obs_per_param · dim`.
    pub min_obs_per_param: f64,
    pub gradient: GradientMode,
    /// Pre-sample state; defaults to the sample mean repeated.
    pub init: Option<InitState>,
    /// Starting point in natural coordinates (`θ`, or `ζ` for targeting).
    pub start: Option<Vec<f64>>,
    /// Skip the covariance step.
    pub skip_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grad_tol: 1e-6,
            max_iter: 2000,
            restarts: 5,
            seed: 0,
            min_obs_per_param: 5.0,
            gradient: GradientMode::Analytic,
            init: None,
            start: None,
            skip_covariance: false,
        }
    }
}

/// Outcome of [`fit_mle`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub neg_loglik: f64,
    /// `𝒪̂⁻¹/T`.
    pub cov: Mat,
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖∇‖∞` in the unconstrained coordinates at the returned point.
    pub grad_norm: f64,
    pub family: Family,
    /// Averaged Hessian `𝒪̂` in natural coordinates.
    pub hessian: Mat,
    /// Set when the Hessian was singular or indefinite and a pseudo-inverse
    /// was used.
    pub cov_flagged: bool,
    pub restarts_used: usize,
}

/// Outcome of [`fit_vt`].
#[derive(Debug, Clone)]
pub struct VtFitResult {
    pub shape: ModelShape,
    /// `vec` of the sample mean.
    pub s_hat: Vec<f64>,
    /// `(u, ν)`.
    pub zeta_hat: Vec<f64>,
    /// `𝒪̂_v/T` over `(vec(S), ζ)`.
    pub cov: Mat,
    pub std_errors: Vec<f64>,
    pub neg_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub cov_flagged: bool,
    pub restarts_used: usize,
}

impl VtFitResult {
    pub fn target(&self) -> SpdMatrix {
        let n = self.shape.n;
        SpdMatrix::from_trusted(Mat::from_column_slice(n, n, &self.s_hat))
    }

    /// `Ω̂ = Ŝ - Σ A Ŝ A' - Σ B Ŝ B'`.
    pub fn implied_omega(&self) -> Result<SpdMatrix> {
        implied_omega(&self.shape, &self.s_hat, &self.zeta_hat)
    }

    /// Full parameter vector with the implied intercept.
    pub fn to_param_vector(&self) -> Result<ParamVector> {
        let omega = self.implied_omega()?;
        let mut theta = omega.vech();
        theta.extend_from_slice(&self.zeta_hat);
        ParamVector::new(self.shape, theta)
    }

    /// Standard errors of `ζ` only.
    pub fn zeta_std_errors(&self) -> &[f64] {
        &self.std_errors[self.s_hat.len()..]
    }
}

fn implied_omega(shape: &ModelShape, s: &[f64], zeta: &[f64]) -> Result<SpdMatrix> {
    let n = shape.n;
    let sm = Mat::from_column_slice(n, n, s);
    let rec = shape.recursion(sm.clone(), &zeta[..shape.coef_total()]);
    let mut om = sm.clone();
    for (c, _) in rec.arch.iter().chain(rec.garch.iter()) {
        om -= c.sandwich(&sm);
    }
    SpdMatrix::new(symmetrize(om))
}

/// Variance/covariance estimate with a flag for pseudo-inversion.
#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub cov: Mat,
    pub flagged: bool,
}

fn default_init(shape: &ModelShape, series: &MatrixSeries, init: Option<&InitState>) -> InitState {
    match init {
        Some(i) => i.clone(),
        None => InitState::from_series_mean(series, shape.max_lag()),
    }
}

/// Average negative log-likelihood `(1/T) Σ l_t(θ)`.
pub fn neg_loglik(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<f64> {
    neg_loglik_grad(theta, series, init).map(|(f, _)| f)
}

/// Average negative log-likelihood and its gradient in natural coordinates.
pub fn neg_loglik_grad(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<(f64, Vec<f64>)> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    engine::evaluate(shape, &data, theta.as_slice(), Drift::Free, true)
        .ok_or_else(|| Error::Singular("conditional mean not positive definite".into()))
}

/// Per-period scores `∂l_t/∂θ`, one row per period.
pub fn scores(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<Mat> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    let rows = engine::scores(shape, &data, theta.as_slice(), Drift::Free)
        .ok_or_else(|| Error::Singular("conditional mean not positive definite".into()))?;
    Ok(rows_to_mat(&rows))
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Mat {
    let cols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Largest `|analytic - central| / (1 + |central|)` over coordinates.
pub fn grad_check(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<f64> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    let x = theta.as_slice();
    let fail = || Error::Singular("conditional mean not positive definite".into());
    let (_, g) = engine::evaluate(shape, &data, x, Drift::Free, true).ok_or_else(fail)?;
    let fd = central_gradient(shape, &data, x, Drift::Free).ok_or_else(fail)?;
    Ok(g.iter().zip(&fd).map(|(a, c)| (a - c).abs() / (1.0 + c.abs())).fold(0.0, f64::max))
}

fn central_gradient(shape: &ModelShape, data: &Data, x: &[f64], drift: Drift) -> Option<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for p in 0..x.len() {
        let h = fd_step(x[p]);
        xp[p] = x[p] + h;
        let fp = engine::evaluate(shape, data, &xp, drift, false)?.0;
        xp[p] = x[p] - h;
        let fm = engine::evaluate(shape, data, &xp, drift, false)?.0;
        xp[p] = x[p];
        g.push((fp - fm) / (2.0 * h));
    }
    Some(g)
}

fn objective(shape: &ModelShape, data: &Data, x: &[f64], drift: Drift, mode: GradientMode) -> Option<(f64, Vec<f64>)> {
    match mode {
        GradientMode::Analytic => engine::evaluate(shape, data, x, drift, true),
        GradientMode::FiniteDifference => {
            let f = engine::evaluate(shape, data, x, drift, false)?.0;
            Some((f, central_gradient(shape, data, x, drift)?))
        }
    }
}

/// Symmetrized central difference of the natural gradient.
fn hessian(shape: &ModelShape, data: &Data, x: &[f64], drift: Drift) -> Option<Mat> {
    let d = x.len();
    let mut h = Mat::zeros(d, d);
    let mut xp = x.to_vec();
    for p in 0..d {
        let step = fd_step(x[p]);
        xp[p] = x[p] + step;
        let gp = engine::evaluate(shape, data, &xp, drift, true)?.1;
        xp[p] = x[p] - step;
        let gm = engine::evaluate(shape, data, &xp, drift, true)?.1;
        xp[p] = x[p];
        for q in 0..d {
            h[(q, p)] = (gp[q] - gm[q]) / (2.0 * step);
        }
    }
    Some(symmetrize(h))
}

/// Inverse of a symmetric matrix, or an eigenvalue pseudo-inverse (keeping
/// only clearly positive eigenvalues) with `flagged = true`.
pub(crate) fn sym_inverse(m: &Mat) -> (Mat, bool) {
    let eig = SymmetricEigen::new(symmetrize(m.clone()));
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thresh = 1e-12 * max.max(f64::MIN_POSITIVE);
    let flagged = eig.eigenvalues.iter().any(|&v| v <= thresh);
    let inv_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| if v > thresh { 1.0 / v } else { 0.0 }),
    );
    let q = &eig.eigenvectors;
    (symmetrize(q * Mat::from_diagonal(&inv_vals) * q.transpose()), flagged)
}

fn std_errors_of(cov: &Mat) -> Vec<f64> {
    (0..cov.nrows()).map(|i| if cov[(i, i)] >= 0.0 { cov[(i, i)].sqrt() } else { f64::NAN }).collect()
}

fn check_length(shape: &ModelShape, t: usize, dim: usize, opts: &FitOptions) -> Result<()> {
    if (t as f64) <= opts.min_obs_per_param * dim as f64 {
        return Err(Error::InvalidArgument(format!(
            "T = {t} is too short for {dim} parameters (need more than {} per parameter, n = {})",
            opts.min_obs_per_param, shape.n
        )));
    }
    Ok(())
}

/// Default start in natural coordinates (without `Ω`).
fn start_coefs(shape: &ModelShape) -> Vec<f64> {
    let blocks = (shape.n_arch() + shape.n_garch()) as f64;
    let c = (0.6 / blocks).sqrt();
    let n = shape.n;
    let mut out = Vec::with_capacity(shape.coef_total());
    for _ in 0..shape.n_arch() + shape.n_garch() {
        match shape.structure {
            Structure::Full => {
                for j in 0..n {
                    for i in 0..n {
                        out.push(if i == j { c } else { 0.0 });
                    }
                }
            }
            Structure::Diagonal => out.extend(core::iter::repeat_n(c, n)),
        }
    }
    out
}

fn start_nu(shape: &ModelShape) -> Vec<f64> {
    let v = 2.0 * shape.n as f64;
    let v = v.max(shape.nu_floor() + 1.0);
    vec![v; shape.nu_len()]
}

struct Run {
    x: Vec<f64>,
    f: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    restarts: usize,
}

/// L-BFGS in unconstrained coordinates with jittered restarts.
fn optimize(shape: &ModelShape, data: &Data, start: Vec<f64>, drift: Drift, opts: &FitOptions) -> Result<Run> {
    let targeted = matches!(drift, Drift::Target(_));
    let eta0 = layout::to_eta(shape, &start, targeted)?;
    let oopts = optim::Options { max_iter: opts.max_iter, tol: opts.grad_tol, ..optim::Options::default() };
    let f = |eta: &[f64]| {
        let x = layout::from_eta(shape, eta, targeted);
        let (v, g) = objective(shape, data, &x, drift, opts.gradient)?;
        Some((v, layout::grad_to_eta(shape, eta, &g, targeted)))
    };
    let mut best: Option<Run> = None;
    let mut rng = rng::stream(opts.seed, 0x6f70_7469);
    for attempt in 0..=opts.restarts {
        let eta_start: Vec<f64> =
            if attempt == 0 { eta0.clone() } else { eta0.iter().map(|v| v + rng.random_range(-0.15..0.15)).collect() };
        let Some(out) = optim::minimize(f, eta_start, &oopts) else { continue };
        let run = Run {
            x: layout::from_eta(shape, &out.x, targeted),
            f: out.f,
            grad_norm: out.grad.iter().fold(0.0, |m, v| m.max(v.abs())),
            iterations: out.iterations,
            converged: out.converged,
            restarts: attempt,
        };
        let better = match &best {
            None => true,
            Some(b) => (run.converged && !b.converged) || (run.converged == b.converged && run.f < b.f),
        };
        if better {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| b.converged) {
            break;
        }
    }
    best.ok_or_else(|| Error::Optimization("objective undefined at every start".into()))
}

/// Full maximum likelihood.
pub fn fit_mle(
    series: &MatrixSeries,
    orders: Orders,
    structure: Structure,
    family: Family,
    opts: &FitOptions,
) -> Result<FitResult> {
    let shape = ModelShape::new(series.n(), orders, structure, family)?;
    check_length(&shape, series.len(), shape.dim(), opts)?;
    let init = default_init(&shape, series, opts.init.as_ref());
    let data = Data::new(&shape, series, &init)?;
    let start = match &opts.start {
        Some(s) => {
            ParamVector::new(shape, s.clone())?;
            s.clone()
        }
        None => {
            let mut x = series.mean().scaled(0.4)?.vech();
            x.extend(start_coefs(&shape));
            x.extend(start_nu(&shape));
            x
        }
    };
    let run = optimize(&shape, &data, start, Drift::Free, opts)?;
    let mut x = run.x;
    let o = shape.omega_len();
    shape.canonicalize_coefs(&mut x[o..o + shape.coef_total()]);
    let theta_hat = ParamVector::new(shape, x)?;
    let (cov, hess, flagged) = if opts.skip_covariance {
        let d = shape.dim();
        (Mat::from_element(d, d, f64::NAN), Mat::from_element(d, d, f64::NAN), true)
    } else {
        let h = hessian(&shape, &data, theta_hat.as_slice(), Drift::Free)
            .ok_or_else(|| Error::Singular("Hessian evaluation left the domain".into()))?;
        let (inv, flagged) = sym_inverse(&h);
        (inv / series.len() as f64, h, flagged)
    };
    Ok(FitResult {
        std_errors: std_errors_of(&cov),
        theta_hat,
        neg_loglik: run.f,
        cov,
        converged: run.converged,
        iterations: run.iterations,
        grad_norm: run.grad_norm,
        family,
        hessian: hess,
        cov_flagged: flagged,
        restarts_used: run.restarts,
    })
}

/// `𝒪̂⁻¹/T` from the averaged Hessian at `theta`.
pub fn asymp_cov_mle(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<CovEstimate> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    let h = hessian(shape, &data, theta.as_slice(), Drift::Free)
        .ok_or_else(|| Error::Singular("Hessian evaluation left the domain".into()))?;
    let (inv, flagged) = sym_inverse(&h);
    Ok(CovEstimate { cov: inv / series.len() as f64, flagged })
}

/// Symmetrized finite-difference Hessian of the average loss at `theta`.
pub fn averaged_hessian(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<Mat> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    hessian(shape, &data, theta.as_slice(), Drift::Free)
        .ok_or_else(|| Error::Singular("Hessian evaluation left the domain".into()))
}

/// Average targeted loss `(1/T) Σ l_vt(s, ζ)` (no barrier outside its margin).
pub fn neg_loglik_vt(
    shape: &ModelShape,
    s: &[f64],
    zeta: &[f64],
    series: &MatrixSeries,
    init: &InitState,
) -> Result<f64> {
    check_zeta(shape, s, zeta)?;
    let data = Data::new(shape, series, init)?;
    engine::evaluate(shape, &data, zeta, Drift::Target(s), false)
        .map(|r| r.0)
        .ok_or_else(|| Error::NotPositiveDefinite { min_eigenvalue: 0.0 })
}

fn check_zeta(shape: &ModelShape, s: &[f64], zeta: &[f64]) -> Result<()> {
    if zeta.len() != shape.zeta_dim() {
        return Err(Error::DimensionMismatch { expected: shape.zeta_dim(), actual: zeta.len() });
    }
    if s.len() != shape.n * shape.n {
        return Err(Error::DimensionMismatch { expected: shape.n * shape.n, actual: s.len() });
    }
    Ok(())
}

/// Two-step variance-targeted estimator.
pub fn fit_vt(
    series: &MatrixSeries,
    orders: Orders,
    structure: Structure,
    family: Family,
    opts: &FitOptions,
) -> Result<VtFitResult> {
    let shape = ModelShape::new(series.n(), orders, structure, family)?;
    check_length(&shape, series.len(), shape.zeta_dim() + shape.omega_len(), opts)?;
    let mean = series.mean();
    let s_hat = vec_of(mean.as_mat());
    let init = default_init(&shape, series, opts.init.as_ref());
    let data = Data::new(&shape, series, &init)?;
    let mut start = match &opts.start {
        Some(z) => {
            check_zeta(&shape, &s_hat, z)?;
            z.clone()
        }
        None => {
            let mut z = start_coefs(&shape);
            z.extend(start_nu(&shape));
            z
        }
    };
    let c = shape.coef_total();
    let mut shrinks = 0;
    while implied_omega(&shape, &s_hat, &start).is_err()
        || engine::evaluate(&shape, &data, &start, Drift::Target(&s_hat), false).is_none()
    {
        if shrinks == 60 {
            return Err(Error::Degenerate("no feasible variance-targeting start".into()));
        }
        start[..c].iter_mut().for_each(|v| *v *= 0.5);
        shrinks += 1;
    }
    let run = optimize(&shape, &data, start, Drift::Target(&s_hat), opts)?;
    let mut zeta = run.x;
    shape.canonicalize_coefs(&mut zeta[..c]);
    let mut fit = VtFitResult {
        shape,
        s_hat,
        zeta_hat: zeta,
        cov: Mat::zeros(0, 0),
        std_errors: Vec::new(),
        neg_loglik: run.f,
        converged: run.converged,
        iterations: run.iterations,
        grad_norm: run.grad_norm,
        cov_flagged: true,
        restarts_used: run.restarts,
    };
    if opts.skip_covariance {
        let d = fit.s_hat.len() + fit.zeta_hat.len();
        fit.cov = Mat::from_element(d, d, f64::NAN);
        fit.std_errors = vec![f64::NAN; d];
    } else {
        let est = vt_covariance(&fit, &data)?;
        fit.std_errors = std_errors_of(&est.cov);
        fit.cov = est.cov;
        fit.cov_flagged = est.flagged;
    }
    Ok(fit)
}

/// Pieces of the targeted sandwich, exposed for diagnostics.
#[derive(Debug, Clone)]
pub(crate) struct VtPieces {
    /// Rows `w_t'`.
    pub w: Mat,
    pub m: Mat,
    pub flagged: bool,
}

pub(crate) fn vt_pieces(fit: &VtFitResult, data: &Data) -> Result<VtPieces> {
    let shape = &fit.shape;
    let n = shape.n;
    let nn = n * n;
    let zd = shape.zeta_dim();
    let s = &fit.s_hat;
    let zeta = &fit.zeta_hat;
    let fail = || Error::Singular("targeted likelihood left the domain during differencing".into());
    let j1 = hessian(shape, data, zeta, Drift::Target(s)).ok_or_else(fail)?;
    // J2: ζ-gradient against symmetric perturbations of S
    let mut j2 = Mat::zeros(zd, nn);
    for col in 0..nn {
        let (i, j) = (col % n, col / n);
        let step = fd_step(s[col]);
        let bump = |sign: f64| {
            let mut sp = s.clone();
            sp[j * n + i] += sign * step / 2.0;
            sp[i * n + j] += sign * step / 2.0;
            engine::evaluate(shape, data, zeta, Drift::Target(&sp), true).map(|r| r.1)
        };
        let gp = bump(1.0).ok_or_else(fail)?;
        let gm = bump(-1.0).ok_or_else(fail)?;
        for r in 0..zd {
            j2[(r, col)] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    // Ψ(u) = (I - A* - B*)⁻¹ (I - B*)
    let rec = shape.recursion(Mat::from_column_slice(n, n, s), &zeta[..shape.coef_total()]);
    let mut a_star = Mat::zeros(nn, nn);
    for (c, _) in &rec.arch {
        a_star += c.kron_square();
    }
    let mut b_star = Mat::zeros(nn, nn);
    for (c, _) in &rec.garch {
        b_star += c.kron_square();
    }
    let id = Mat::identity(nn, nn);
    let psi = (&id - &a_star - &b_star)
        .lu()
        .solve(&(&id - &b_star))
        .ok_or_else(|| Error::Singular("I - A* - B* is singular".into()))?;
    let sig = engine::sigma_flat(shape, data, zeta, Drift::Target(s)).ok_or_else(fail)?;
    let sc = engine::scores(shape, data, zeta, Drift::Target(s)).ok_or_else(fail)?;
    let t_len = data.t;
    let mut w = Mat::zeros(t_len, nn + zd);
    for t0 in 0..t_len {
        let resid = DVector::from_iterator(nn, (0..nn).map(|k| data.y[t0 * nn + k] - sig[t0 * nn + k]));
        let u = &psi * resid;
        for k in 0..nn {
            w[(t0, k)] = u[k];
        }
        for k in 0..zd {
            w[(t0, nn + k)] = sc[t0][k];
        }
    }
    let (j1_inv, flagged) = sym_inverse(&j1);
    let mut m = Mat::zeros(nn + zd, nn + zd);
    for k in 0..nn {
        m[(k, k)] = 1.0;
    }
    let top = -(&j1_inv * &j2);
    m.view_mut((nn, 0), (zd, nn)).copy_from(&top);
    m.view_mut((nn, nn), (zd, zd)).copy_from(&(-&j1_inv));
    Ok(VtPieces { w, m, flagged })
}

fn vt_covariance(fit: &VtFitResult, data: &Data) -> Result<CovEstimate> {
    let p = vt_pieces(fit, data)?;
    let t = data.t as f64;
    let eww = p.w.transpose() * &p.w / t;
    let o_v = &p.m * eww * p.m.transpose();
    Ok(CovEstimate { cov: symmetrize(o_v) / t, flagged: p.flagged })
}

/// `𝒪̂_v/T` over `(vec(S), ζ)` for a targeted fit.
pub fn asymp_cov_vt(fit: &VtFitResult, series: &MatrixSeries, init: &InitState) -> Result<CovEstimate> {
    let data = Data::new(&fit.shape, series, init)?;
    vt_covariance(fit, &data)
}

/// `Σ_t(θ)` for `t = 1..=T` under a full parameter vector.
pub fn fitted_sigma(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<Vec<Mat>> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    let flat = engine::sigma_flat(shape, &data, theta.as_slice(), Drift::Free)
        .ok_or_else(|| Error::Singular("conditional mean undefined".into()))?;
    let n = shape.n;
    Ok(flat.chunks(n * n).map(|c| Mat::from_column_slice(n, n, c)).collect())
}

/// Specification carried by a parameter vector.
pub fn to_spec(theta: &ParamVector) -> Result<AnySpec> {
    theta.to_spec()
}

#[cfg(test)]
mod tests;
