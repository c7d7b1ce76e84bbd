//! Standardized residuals and the inner-product portmanteau tests.
//!
//! With `𝔷_t = vec(Σ_t^{-1/2} Y_t Σ_t^{-1/2} - I)` and `b_{t,j} = 𝔷_t'𝔷_{t-j}`,
//! the statistic is `T 𝒱_l' V̂⁻¹ 𝒱_l` where `𝒱_l` averages `b_t = (b_{t,1},
//! …, b_{t,l})'`. Estimation error in `θ̂` enters through
//! `D = E[𝔷_{t-j}' ∂𝔷_t/∂θ']`, obtained by central differences.

use alloc::vec::Vec;

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::estimate::{self, sigma_flat, vt_pieces, Data, Drift, FitResult, ModelShape, ParamVector, VtFitResult};
use crate::matalg::{symmetrize, Mat, MatrixSeries};
use crate::model::InitState;
#[allow(unused_imports)]
use crate::num::Real;
use crate::special::chi2_sf;

/// Lags reported by default.
pub const DEFAULT_LAGS: [usize; 5] = [2, 3, 4, 5, 6];

/// Rows are `𝔷_t'`, one per period (`T x n²`).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    n: usize,
    z: Mat,
}

impl ResidualSeries {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    pub fn as_mat(&self) -> &Mat {
        &self.z
    }

    /// `𝔷_t` reshaped to `n x n`.
    pub fn matrix(&self, t: usize) -> Mat {
        Mat::from_iterator(self.n, self.n, self.z.row(t).iter().cloned())
    }

    /// Column means of the rows.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.z.ncols()).map(|c| self.z.column(c).mean()).collect()
    }
}

/// Which estimate of the variance of `√T 𝒱_l` to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceForm {
    /// `tr(Γ̂²) I + D K D' + D M G + G' M' D'` with `Γ̂ = E[𝔷𝔷']`, `K` the
    /// estimator covariance kernel, `M` its influence map and `G = E[w b']`.
    /// Cross moments between the score and `b_t` use the identity
    /// `E[s_t b_t'] = D'`, so only second moments of `𝔷` are estimated.
    Derived,
    /// Sample variance of the per-period influence `b_t + D ψ_t`, where `ψ_t`
    /// is the influence function of the estimator. Consistent without
    /// assuming a particular sign for the estimation-effect cross term.
    Influence,
    /// `(E[𝔷'𝔷])² I + D R D'` with `R` the estimator covariance kernel
    /// (`𝒪⁻¹`, or the two-step sandwich).
    Printed,
}

/// One portmanteau test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub lags: usize,
    pub p_value: f64,
    /// Degrees of freedom used for the p-value (`l` unless `V̂` was rank
    /// deficient).
    pub dof: usize,
    /// Set when `V̂` needed a pseudo-inverse.
    pub flagged: bool,
}

fn residual_rows(n: usize, t: usize, y: &[f64], sigma: &[f64]) -> Result<Mat> {
    let nn = n * n;
    let mut z = Mat::zeros(t, nn);
    for t0 in 0..t {
        let s = Mat::from_column_slice(n, n, &sigma[t0 * nn..(t0 + 1) * nn]);
        let eig = SymmetricEigen::new(symmetrize(s));
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        let q = &eig.eigenvectors;
        let root = q * Mat::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt())) * q.transpose();
        let ym = Mat::from_column_slice(n, n, &y[t0 * nn..(t0 + 1) * nn]);
        let mut r = &root * ym * &root;
        for i in 0..n {
            r[(i, i)] -= 1.0;
        }
        let r = symmetrize(r);
        for (k, v) in r.iter().enumerate() {
            z[(t0, k)] = *v;
        }
    }
    Ok(z)
}

/// Residuals `𝔷_t(γ)` under a full parameter vector.
pub fn residuals(theta: &ParamVector, series: &MatrixSeries, init: &InitState) -> Result<ResidualSeries> {
    let shape = theta.shape();
    let data = Data::new(shape, series, init)?;
    let sigma = sigma_flat(shape, &data, theta.as_slice(), Drift::Free)
        .ok_or_else(|| Error::Singular("conditional mean undefined".into()))?;
    Ok(ResidualSeries { n: shape.n, z: residual_rows(shape.n, data.t, &data.y, &sigma)? })
}

fn check_lag(l: usize, t: usize) -> Result<()> {
    if l == 0 || l >= t {
        return Err(Error::InvalidArgument(alloc::format!("lag {l} must satisfy 1 <= l < T = {t}")));
    }
    Ok(())
}

/// `b_{t,j}` for `t = l+1..T` (rows) and `j = 1..l` (columns).
fn inner_products(z: &Mat, l: usize) -> Mat {
    let t = z.nrows();
    Mat::from_fn(t - l, l, |r, j| z.row(r + l).dot(&z.row(r + l - j - 1)))
}

/// `𝒱_l = (1/T) Σ_{t=l+1}^T (b_{t,1}, …, b_{t,l})'`.
pub fn vstat(res: &ResidualSeries, l: usize) -> Result<Vec<f64>> {
    let t = res.len();
    check_lag(l, t)?;
    let b = inner_products(&res.z, l);
    Ok((0..l).map(|j| b.column(j).sum() / t as f64).collect())
}

/// Everything the statistic needs, shared across lags.
struct Ingredients {
    z: Mat,
    /// `∂𝔷_t/∂θ_p`, one `T x n²` block per parameter.
    jac: Vec<Mat>,
    /// Per-period influence of the estimator (`T x d`).
    psi: Mat,
    /// Estimator covariance kernel (`d x d`).
    kernel: Mat,
    /// Influence map `M` (`d x d_w`), `ψ_t = M w_t`.
    map: Mat,
    /// Non-score leading block of `w_t` (`T x k`, `k` may be 0).
    w_extra: Mat,
}

fn residual_jacobian(
    shape: &ModelShape,
    data: &Data,
    x: &[f64],
    drift_at: &dyn Fn(&[f64]) -> (Vec<f64>, Option<Vec<f64>>),
    dim: usize,
) -> Result<Vec<Mat>> {
    let fail = || Error::Singular("residual differencing left the domain".into());
    let mut out = Vec::with_capacity(dim);
    let mut xp = x.to_vec();
    for p in 0..dim {
        let h = f64::EPSILON.cbrt() * x[p].abs().max(1.0);
        let mut eval = |v: f64| -> Result<Mat> {
            xp[p] = v;
            let (theta, target) = drift_at(&xp);
            let drift = match &target {
                Some(s) => Drift::Target(s),
                None => Drift::Free,
            };
            let sig = sigma_flat(shape, data, &theta, drift).ok_or_else(fail)?;
            residual_rows(shape.n, data.t, &data.y, &sig)
        };
        let plus = eval(x[p] + h)?;
        let minus = eval(x[p] - h)?;
        xp[p] = x[p];
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

fn statistic(ing: &Ingredients, l: usize, form: VarianceForm) -> Result<TestResult> {
    let t = ing.z.nrows();
    check_lag(l, t)?;
    let b = inner_products(&ing.z, l);
    let m = t - l;
    let d = ing.jac.len();
    let v: DVector<f64> = DVector::from_iterator(l, (0..l).map(|j| b.column(j).sum() / t as f64));
    // D_j = mean over t > l of 𝔷_{t-j}' ∂𝔷_t/∂θ
    let mut dmat = Mat::zeros(l, d);
    for (p, jp) in ing.jac.iter().enumerate() {
        for j in 0..l {
            let mut s = 0.0;
            for r in 0..m {
                s += ing.z.row(r + l - j - 1).dot(&jp.row(r + l));
            }
            dmat[(j, p)] = s / m as f64;
        }
    }
    let var = match form {
        VarianceForm::Influence => {
            let mut acc = Mat::zeros(l, l);
            for r in 0..m {
                let psi = ing.psi.row(r + l).transpose();
                let e = b.row(r).transpose() + &dmat * psi;
                acc += &e * e.transpose();
            }
            acc / m as f64
        }
        VarianceForm::Derived => {
            let nn = ing.z.ncols();
            let mut gamma = Mat::zeros(nn, nn);
            for r in l..t {
                let zr = ing.z.row(r);
                gamma += zr.transpose() * zr;
            }
            gamma /= m as f64;
            let c = (&gamma * &gamma).trace();
            let k = ing.w_extra.ncols();
            let mut g = Mat::zeros(ing.map.ncols(), l);
            for r in 0..m {
                for (i, w) in ing.w_extra.row(r + l).iter().enumerate() {
                    for j in 0..l {
                        g[(i, j)] += w * b[(r, j)];
                    }
                }
            }
            g.rows_mut(0, k).scale_mut(1.0 / m as f64);
            let score_cols = d - k;
            g.rows_mut(k, score_cols).copy_from(&dmat.columns(k, score_cols).transpose());
            let cross = &dmat * &ing.map * &g;
            Mat::identity(l, l) * c + &dmat * &ing.kernel * dmat.transpose() + &cross + cross.transpose()
        }
        VarianceForm::Printed => {
            let c: f64 = (l..t).map(|r| ing.z.row(r).norm_squared()).sum::<f64>() / m as f64;
            Mat::identity(l, l) * (c * c) + &dmat * &ing.kernel * dmat.transpose()
        }
    };
    let var = symmetrize(var);
    let eig = SymmetricEigen::new(var.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    // residuals are unit-free, so an absolute floor is meaningful
    let thresh = (1e-10 * max).max(1e-20);
    let rank = eig.eigenvalues.iter().filter(|&&x| x > thresh).count();
    let flagged = rank < l;
    let proj = eig.eigenvectors.transpose() * &v;
    let mut stat = 0.0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > thresh {
            stat += proj[k] * proj[k] / lam;
        }
    }
    let stat = (t as f64 * stat).max(0.0);
    let p_value = if rank == 0 { 1.0 } else { chi2_sf(stat, rank as f64) };
    Ok(TestResult { statistic: stat, lags: l, p_value, dof: rank, flagged })
}

fn mle_ingredients(fit: &FitResult, series: &MatrixSeries, init: &InitState) -> Result<Ingredients> {
    let shape = fit.theta_hat.shape();
    let data = Data::new(shape, series, init)?;
    let x = fit.theta_hat.as_slice();
    let sig =
        sigma_flat(shape, &data, x, Drift::Free).ok_or_else(|| Error::Singular("conditional mean undefined".into()))?;
    let z = residual_rows(shape.n, data.t, &data.y, &sig)?;
    let identity = |v: &[f64]| (v.to_vec(), None);
    let mut jac = residual_jacobian(shape, &data, x, &identity, shape.omega_len() + shape.coef_total())?;
    // 𝔷 does not depend on ν
    for _ in 0..shape.nu_len() {
        jac.push(Mat::zeros(data.t, shape.n * shape.n));
    }
    let hess = if fit.hessian.iter().all(|v| v.is_finite()) {
        fit.hessian.clone()
    } else {
        estimate::averaged_hessian(&fit.theta_hat, series, init)?
    };
    let (h_inv, _) = estimate::sym_inverse(&hess);
    let sc = estimate::scores(&fit.theta_hat, series, init)?;
    let psi = -(sc * &h_inv);
    let map = -h_inv.clone();
    Ok(Ingredients { z, jac, psi, kernel: h_inv, map, w_extra: Mat::zeros(data.t, 0) })
}

fn vt_ingredients(fit: &VtFitResult, series: &MatrixSeries, init: &InitState) -> Result<Ingredients> {
    let shape = &fit.shape;
    let data = Data::new(shape, series, init)?;
    let nn = shape.n * shape.n;
    let sig = sigma_flat(shape, &data, &fit.zeta_hat, Drift::Target(&fit.s_hat))
        .ok_or_else(|| Error::Singular("conditional mean undefined".into()))?;
    let z = residual_rows(shape.n, data.t, &data.y, &sig)?;
    // coordinates (vec S, ζ); S moves symmetrically
    let mut x = fit.s_hat.clone();
    x.extend_from_slice(&fit.zeta_hat);
    let n = shape.n;
    let split = |v: &[f64]| {
        let mut s = v[..nn].to_vec();
        let base = &fit.s_hat;
        for i in 0..n {
            for j in 0..n {
                // average the two moved entries so a move in (i,j) is symmetric
                let d = (v[j * n + i] - base[j * n + i] + v[i * n + j] - base[i * n + j]) / 2.0;
                s[j * n + i] = base[j * n + i] + d;
            }
        }
        (v[nn..].to_vec(), Some(s))
    };
    let dim = nn + shape.coef_total();
    let mut jac = residual_jacobian(shape, &data, &x, &split, dim)?;
    for _ in 0..shape.nu_len() {
        jac.push(Mat::zeros(data.t, nn));
    }
    let pieces = vt_pieces(fit, &data)?;
    let psi = &pieces.w * pieces.m.transpose();
    let eww = pieces.w.transpose() * &pieces.w / data.t as f64;
    let kernel = symmetrize(&pieces.m * eww * pieces.m.transpose());
    let w_extra = pieces.w.columns(0, nn).into_owned();
    Ok(Ingredients { z, jac, psi, kernel, map: pieces.m, w_extra })
}

/// `Π(l)` for a full maximum-likelihood fit.
pub fn pi_test(fit: &FitResult, series: &MatrixSeries, init: &InitState, l: usize) -> Result<TestResult> {
    Ok(pi_tests(fit, series, init, &[l], VarianceForm::Derived)?.remove(0))
}

/// `Π(l)` for every lag in `lags`, sharing the derivative work.
pub fn pi_tests(
    fit: &FitResult,
    series: &MatrixSeries,
    init: &InitState,
    lags: &[usize],
    form: VarianceForm,
) -> Result<Vec<TestResult>> {
    for &l in lags {
        check_lag(l, series.len())?;
    }
    let ing = mle_ingredients(fit, series, init)?;
    lags.iter().map(|&l| statistic(&ing, l, form)).collect()
}

/// `Π_v(l)` for a two-step fit.
pub fn pi_v_test(fit: &VtFitResult, series: &MatrixSeries, init: &InitState, l: usize) -> Result<TestResult> {
    Ok(pi_v_tests(fit, series, init, &[l], VarianceForm::Derived)?.remove(0))
}

/// `Π_v(l)` for every lag in `lags`.
pub fn pi_v_tests(
    fit: &VtFitResult,
    series: &MatrixSeries,
    init: &InitState,
    lags: &[usize],
    form: VarianceForm,
) -> Result<Vec<TestResult>> {
    for &l in lags {
        check_lag(l, series.len())?;
    }
    let ing = vt_ingredients(fit, series, init)?;
    lags.iter().map(|&l| statistic(&ing, l, form)).collect()
}

/// Several variance forms at once (for calibration studies).
pub fn pi_tests_forms(
    fit: &FitResult,
    series: &MatrixSeries,
    init: &InitState,
    lags: &[usize],
    forms: &[VarianceForm],
) -> Result<Vec<Vec<TestResult>>> {
    let ing = mle_ingredients(fit, series, init)?;
    forms.iter().map(|&f| lags.iter().map(|&l| statistic(&ing, l, f)).collect()).collect()
}

/// Two-step counterpart of [`pi_tests_forms`].
pub fn pi_v_tests_forms(
    fit: &VtFitResult,
    series: &MatrixSeries,
    init: &InitState,
    lags: &[usize],
    forms: &[VarianceForm],
) -> Result<Vec<Vec<TestResult>>> {
    let ing = vt_ingredients(fit, series, init)?;
    forms.iter().map(|&f| lags.iter().map(|&l| statistic(&ing, l, f)).collect()).collect()
}

/// One-sample Kolmogorov–Smirnov distance and asymptotic p-value of
/// `samples` against a continuous `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    // Stephens' small-sample correction
    (d, crate::special::kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}
